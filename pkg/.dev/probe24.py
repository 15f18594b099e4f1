import numpy as np, time
from bifurkit.model import ModelParams, endemic_equilibria
from bifurkit.systems import model_system
from bifurkit.continuation import continue_equilibria, BifKind
import bifurkit.cycles as C

sysm = model_system()
p2 = ModelParams(beta=1.1, rho=0.24, alpha=0.2, gamma=0.3, eta=0.02)
br2 = continue_equilibria(sysm, p2, 'beta', endemic_equilibria(p2)[0].state, (0.05, 3.5))
hs = sorted([r for r in br2.records if r.kind is BifKind.HOPF_SUPER], key=lambda r: r.params['beta'])
p_in2 = p2.with_value('beta', hs[0].params['beta'] + 0.005)
c0 = C.cycle_from_hopf(sysm, p_in2, hs[0], offset=2e-3)
t0 = time.time()
orig_fin = C._finalize_cycle
def fin2(sh, p, nodes, period, normal, ref, comp, precomputed=None):
    cq = orig_fin(sh, p, nodes, period, normal, ref, comp, precomputed)
    print('acc t=%5.1f T=%8.3f amp=%.6f' % (time.time()-t0, period, cq.amplitude), flush=True)
    return cq
C._finalize_cycle = fin2
for direction in ('fwd',):
    bb = C.continue_cycles(sysm, p_in2, 'beta', c0, (0.05, 3.5), bidirectional=False)
    print('done %d fwd=%s LPCs=%d betas [%.5f, %.5f]' % (
        len(bb.samples), bb.termination.value, len(bb.records),
        bb.params().min(), bb.params().max()))
