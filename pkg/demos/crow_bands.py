"""Where the pump, signal and idler sit relative to the CROW passbands."""
from pairforge.config import default_cw_config
from pairforge.crow import WavelengthTriple, band_alignment, idler_wavelength, insertion_loss_db

crow = default_cw_config().crow
idler = idler_wavelength(1549.6, 1529.5)
print(f"idler from energy conservation: {idler:.3f} nm")
align = band_alignment(crow, WavelengthTriple(1549.6, 1529.5, idler), tolerance_nm=0.5)
print(align)
print(f"insertion loss at band centre: {insertion_loss_db(crow):.2f} dB")
