"""Element symbol table for atomic numbers 1 through 100."""

from .errors import OutOfRangeError

MAX_Z = 100

SYMBOLS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
)

_Z_BY_SYMBOL = {sym: z for z, sym in enumerate(SYMBOLS, start=1)}


def symbol_to_z(symbol: str) -> int:
    """Atomic number for a symbol; raises KeyError for unknown symbols."""
    return _Z_BY_SYMBOL[symbol]


def z_to_symbol(z: int) -> str:
    if not 1 <= z <= MAX_Z:
        raise OutOfRangeError(f"atomic number {z} outside 1..{MAX_Z}")
    return SYMBOLS[z - 1]


def is_known_symbol(symbol: str) -> bool:
    return symbol in _Z_BY_SYMBOL
