import mpmath
import pytest

from kgstep.core import SpacetimePoint, StepParams, light_cone, preset_params


@pytest.fixture
def params():
    return preset_params()


def mp_bessel(n_max, eta, dps):
    """J_0..J_n_max by Miller recurrence carried out in mpmath."""
    with mpmath.workdps(dps):
        eta = mpmath.mpf(eta)
        start = n_max + int(eta) + 60 + int(3 * mpmath.sqrt(n_max + eta))
        a = [mpmath.mpf(0)] * (start + 2)
        a[start] = mpmath.mpf(10) ** -30
        for n in range(start, 0, -1):
            a[n - 1] = 2 * n / eta * a[n] - a[n + 1]
        norm = a[0] + 2 * mpmath.fsum(a[2::2])
        return [v / norm for v in a[: n_max + 1]]


def psi_reference(p: StepParams, x: float, t: float, dps: int = 50) -> complex:
    """Resummed Bessel series evaluated at ``dps`` digits with a generous,
    fixed truncation.  Shares no code with the package evaluators beyond
    the light-cone time ct."""
    ct_double = light_cone(p, SpacetimePoint(x, t)).ct
    with mpmath.workdps(dps):
        ct, X = mpmath.mpf(ct_double), mpmath.mpf(x)
        xi = mpmath.sqrt((ct + X) / (ct - X))
        eta = p.mu0 * mpmath.sqrt((ct + X) * (ct - X))
        mu0, e = mpmath.mpf(p.mu0), mpmath.mpf(p.energy_k)
        q = mpmath.sqrt(mu0**2 - e**2)
        n_max = int(eta) + int(25 * eta ** (1 / 3.0)) + 80
        J = mp_bessel(n_max, eta, dps)
        total = 0
        for ep in (e + 1j * q, e - 1j * q):
            k, z = 2 * e / ep, ep / mu0
            w = -1j * z / xi
            s = -(1j * z / (2 * xi)) * J[1]
            wn = w
            for n in range(2, n_max):
                wn *= w
                s += wn * J[n]
            total += k * s
        return complex(total)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
