"""Generate the bundled graphite / LFP open-circuit potential tables.

Functional forms follow the widely used graphite fit (exp + three tanh terms)
and the LFP fit (linear + two exponentials). The decay rate of the
low-stoichiometry exponential of each curve is calibrated so that

    U+(0.016) - U-(0.795) = 3.6 V   (fully charged rest voltage)
    U+(0.89)  - U-(0.0018) = 2.0 V  (fully discharged rest voltage)

Knots include those four stoichiometries exactly so interpolation passes
through the calibrated values.
"""
import numpy as np
from scipy.optimize import brentq

V_MAX, V_MIN = 3.6, 2.0
X100_NEG, X0_NEG, X100_POS, X0_POS = 0.795, 0.0018, 0.016, 0.89


def graphite(x, k):
    return (1.9793 * np.exp(-k * x) + 0.2482
            - 0.0909 * np.tanh(29.8538 * (x - 0.1234))
            - 0.04478 * np.tanh(14.9159 * (x - 0.2769))
            - 0.0205 * np.tanh(30.4444 * (x - 0.6103)))


def lfp(x, k):
    return 3.4077 - 0.020269 * x + 0.5 * np.exp(-k * x) - 0.9 * np.exp(-30.0 * (1.0 - x))


kn, kp = 39.3631, 150.0
for _ in range(50):
    kn = brentq(lambda k: lfp(X0_POS, kp) - graphite(X0_NEG, k) - V_MIN, 1.0, 5000.0)
    kp = brentq(lambda k: lfp(X100_POS, k) - graphite(X100_NEG, kn) - V_MAX, 1.0, 5000.0)
kn, kp = float(f"{kn:.6g}"), float(f"{kp:.6g}")
print("k_neg", kn, "k_pos", kp)
print("charged rest V", lfp(X100_POS, kp) - graphite(X100_NEG, kn))
print("discharged rest V", lfp(X0_POS, kp) - graphite(X0_NEG, kn))

special = [X0_NEG, X100_POS, X100_NEG, X0_POS]
xn = np.unique(np.round(np.concatenate([
    np.linspace(0.0, 0.02, 101), np.linspace(0.02, 1.0, 197), special]), 12))
xp = np.unique(np.round(np.concatenate([
    np.linspace(0.0, 0.05, 51), np.linspace(0.05, 1.0, 191), special]), 12))


def write(path, xs, f):
    with open(path, "w") as fh:
        fh.write("x,u_volts\n")
        for x in xs:
            fh.write(f"{x:.12g},{f(x):.12f}\n")


write("crates/core/data/graphite_ocp.csv", xn, lambda x: graphite(x, kn))
write("crates/core/data/lfp_ocp.csv", xp, lambda x: lfp(x, kp))
print(len(xn), len(xp))
