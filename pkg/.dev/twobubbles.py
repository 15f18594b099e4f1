import numpy as np, time
from bifurkit.model import ModelParams, endemic_equilibria
from bifurkit.systems import model_system
from bifurkit.continuation import continue_equilibria, BifKind
import bifurkit.cycles as C

sysm = model_system()
for rho, seedbeta in ((0.24, 1.1), (0.2, 1.2)):
    p2 = ModelParams(beta=seedbeta, rho=rho, alpha=0.2, gamma=0.3, eta=0.02)
    br2 = continue_equilibria(sysm, p2, 'beta', endemic_equilibria(p2)[0].state, (0.05, 3.5))
    hs = sorted([r for r in br2.records if r.kind is BifKind.HOPF_SUPER], key=lambda r: r.params['beta'])
    p_in2 = p2.with_value('beta', hs[0].params['beta'] + 0.005)
    c0 = C.cycle_from_hopf(sysm, p_in2, hs[0], offset=2e-3)
    t0 = time.time()
    bb = C.continue_cycles(sysm, p_in2, 'beta', c0, (0.05, 3.5))
    print('rho=%g: %d samples %.1fs fwd=%s bwd=%s LPCs=%d beta [%.5f,%.5f] hopfs [%.5f,%.5f]' % (
        rho, len(bb.samples), time.time()-t0, bb.termination.value, bb.termination_backward.value,
        len(bb.records), bb.params().min(), bb.params().max(),
        hs[0].params['beta'], hs[1].params['beta']), flush=True)
