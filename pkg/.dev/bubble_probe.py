import numpy as np, time, math
from dataclasses import replace
from bifurkit.model import ModelParams, endemic_equilibria, EquilibriumKind
from bifurkit.systems import model_system
from bifurkit.continuation import continue_equilibria, BifKind
import bifurkit.cycles as C

sysm = model_system()
def saddle_fn(p):
    for e in endemic_equilibria(p):
        if e.kind is EquilibriumKind.ENDEMIC_MINUS:
            return e.state
    return None

p2 = ModelParams(beta=1.1, rho=0.24, alpha=0.2, gamma=0.3, eta=0.02)
br2 = continue_equilibria(sysm, p2, 'beta', endemic_equilibria(p2)[0].state, (0.05, 3.5))
hs = sorted([r for r in br2.records if r.kind is BifKind.HOPF_SUPER], key=lambda r: r.params['beta'])
p_in2 = p2.with_value('beta', hs[0].params['beta'] + 0.005)
c0 = C.cycle_from_hopf(sysm, p_in2, hs[0], offset=2e-3)
print('seed T=%.2f amp=%.5f' % (c0.period, c0.amplitude), flush=True)

orig_fin = C._finalize_cycle
t0 = time.time()
def fin2(sh, p, nodes, period, normal, ref, comp):
    cycq = orig_fin(sh, p, nodes, period, normal, ref, comp)
    print('  acc t=%5.1fs T=%8.3f amp=%.5f' % (time.time()-t0, period, cycq.amplitude), flush=True)
    return cycq
C._finalize_cycle = fin2

s = replace(C.CycleSettings(), max_points=50)
bb = C.continue_cycles(sysm, p_in2, 'beta', c0, (0.05, 3.5), settings=s, saddle_fn=saddle_fn, bidirectional=False)
print('done %d samples term=%s betas [%.5f, %.5f]' % (len(bb.samples), bb.termination.value, bb.params().min(), bb.params().max()))
