"""The secure-average oracle: masked aggregation and call accounting.

Every aggregation in this package flows through one primitive, a weighted
average of device vectors. In masked mode each ordered pair of devices
shares a random mask added on one side and subtracted on the other, so
individual contributions are hidden while the total is unchanged up to
floating-point rounding. Counters record how many averages were taken and
a modeled communication cost of m*d + m^2 units per call.
"""

import numpy as np

from fedgm import SecureAverageOracle

rng = np.random.default_rng(7)
m, d = 6, 4
values = rng.standard_normal((m, d))
weights = rng.uniform(0.5, 2.0, m)

plain = SecureAverageOracle("plain")
masked = SecureAverageOracle("masked", seed=42)

out_plain = plain.average(values, weights)
out_masked = masked.average(values, weights)

print("plain weighted average: ", np.round(out_plain, 8))
print("masked weighted average:", np.round(out_masked, 8))
print(f"max deviation: {np.abs(out_plain - out_masked).max():.2e}")

print("\nwhat one device would have revealed in the clear:")
print("  contribution of device 0:", np.round(values[0], 4))
print("  (in masked mode only mask-perturbed vectors leave a device)")

print("\ncall accounting after one average of 6 vectors in R^4:")
print(f"  call_count    = {plain.call_count}")
print(f"  bytes_modeled = {plain.bytes_modeled}  (m*d + m^2 = {m * d + m * m})")

plain.average(values[:3], weights[:3])
print("\nafter a second, smaller average:")
print(f"  call_count    = {plain.call_count}")
print(f"  bytes_modeled = {plain.bytes_modeled}")

print("\nedge cases pinned by the tests:")
single = SecureAverageOracle("plain").average(np.array([2.5, -1.0]), np.array([3.0]))
print(f"  single contribution is returned unchanged: {single}")
pair = SecureAverageOracle("plain").average(
    np.array([[1.0, 2.0], [-1.0, -2.0]]), np.array([5.0, 5.0])
)
print(f"  a symmetric pair cancels to zero: {pair}")
