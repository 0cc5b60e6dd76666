"""Spectral rendering basics.

Walks through the pixel-level model: wavelength grid, reflectance and
illumination curves, camera sensitivities, the shading factor, and the
band-wise integration that produces an RGB value.
"""

import numpy as np

import chromadot as cd

grid = cd.DEFAULT_GRID
print(f"grid: {grid.band_count} bands, {grid.start_nm:.0f}-{grid.stop_nm:.0f} nm")

# the built-in Gaussian stand-ins for projector primaries and camera response
primaries = cd.default_primaries(grid)
sensitivity = cd.default_sensitivity(grid)
lam = grid.wavelengths()
for name, spec in zip("RGB", primaries.as_tuple()):
    peak = lam[np.argmax(spec.values)]
    print(f"  {name} primary peaks at {peak:.0f} nm")

# a smooth reflectance: bright in the long wavelengths (a reddish material)
values = 0.15 + 0.75 * (1.0 / (1.0 + np.exp(-(lam - 580.0) / 20.0)))
reflectance = cd.Spectrum.reflectance(grid, values)

# shading combines inverse-square falloff with the Lambertian cosine
x = np.array([0.05, 0.0, 0.5])         # surface point, 0.5 m away
x_pro = np.array([0.1, 0.0, 0.0])      # projector position
n = np.array([0.0, 0.0, -1.0])         # surface normal facing the camera
s = cd.shading_factor(x, x_pro, n)
print(f"shading factor at 0.5 m: {s:.3f}")

# RGB response under each projector primary
for name, l in zip("RGB", primaries.as_tuple()):
    rgb = cd.render_pixel(s, sensitivity, l, reflectance)
    print(f"  illuminated by {name}: RGB = {np.array2string(rgb, precision=3)}")

# pushing the surface twice as far quarters the response
x_far = np.array([0.05, 0.0, 1.0])
s_far = cd.shading_factor(x_far, x_pro, np.array([0.0, 0.0, -1.0]))
print(f"shading ratio 0.5 m vs 1.0 m: {s / s_far:.2f} (inverse-square)")
