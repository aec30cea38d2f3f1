"""Independent routes for the frozen reference values used in the tests.

Not collected by pytest.  Run ``python3 tests/oracle_values.py`` to
regenerate; none of it imports the package.
"""
import numpy as np, mpmath as mp, math
from scipy import integrate, special, stats
rng=np.random.default_rng(20261016)
# (a) mmse flat B=2, E=1, tau=1 : 2 E E[sigmoid(-(g+sqrt(2g)Z))^2]
g=1.0
f=lambda z: stats.norm.pdf(z)*special.expit(-(g+math.sqrt(2*g)*z))**2
print("a mmse B2", 2*integrate.quad(f,-np.inf,np.inf,epsabs=1e-15,epsrel=1e-13)[0])
# (b) denoise B=4, E=1, tau=0.5, s=(1,0,0,0)
mp.mp.dps=40
e2=mp.e**2; print("b w", [mp.nstr(v,20) for v in (e2/(e2+3), 1/(e2+3))])
# (c) pe flat B=256 at E/tau = 2 ln B: 1 - int phi(z) Phi(a+z)^{255}
B=256; a=math.sqrt(2*math.log(B))
f=lambda z: stats.norm.pdf(z)*math.exp(255*special.log_ndtr(a+z))
print("c pe", 1-integrate.quad(f,-40,40,epsabs=1e-15,epsrel=1e-13,limit=400)[0])
# (d) MI flat B=4, tau=0.25 : lnB - E ln(1+sum exp(-g + sqrt(g)(Zk - Z1)))
def mi_mc(B,g,n):
    vals=[]
    for _ in range(n//200000):
        Z=rng.standard_normal((200000,B))
        d=-g+math.sqrt(g)*(Z[:,1:]-Z[:,[0]])
        vals.append(np.log1p(np.exp(d).sum(1)))
    v=np.concatenate(vals); return math.log(B)-v.mean(), v.std()/math.sqrt(v.size)
print("d mi B4 tau.25", mi_mc(4,4.0,4_000_000))
# (e) mmse flat B=4, E=2, tau=1.5 (g=4/3)
def mmse_mc(B,E,tau,n):
    g=E/tau; vals=[]
    for _ in range(n//200000):
        Z=rng.standard_normal((200000,B)); b=math.sqrt(g)*Z; b[:,0]+=g
        p=special.softmax(b,axis=1); err=(1-p[:,0])**2+(p[:,1:]**2).sum(1)
        vals.append(E*err)
    v=np.concatenate(vals); return v.mean(), v.std()/math.sqrt(v.size)
print("e mmse B4 E2 tau1.5", mmse_mc(4,2.0,1.5,4_000_000))
# (f) potential flat B=4, E=1, mu=.5, s2=.25, psi=.5 -> tau=.5, g=2
m,s=mi_mc(4,2.0,4_000_000); br=(math.log(2)-0.5)/(2*0.5); print("f F", m+br, s)
# (g) converse mu=0.2 M=256 eps=1e-3
mu,M,eps=0.2,256,1e-3; k=8
t1=(special.ndtri(1-1/M)-special.ndtri(eps))**2/(2*k)
hb=-(eps*math.log2(eps)+(1-eps)*math.log2(1-eps))
t2=(2**(2*mu*(k-eps*math.log2(M-1)-hb))-1)/(2*mu*k)
print("g converse", t1, t2, max(t1,t2))
# (h) s_opt(10) by Newton on h(S)=S-0.5*log2(1+20S)
S=3.0
for _ in range(60):
    h=S-0.5*math.log2(1+20*S); dh=1-0.5*20/((1+20*S)*math.log(2)); S-=h/dh
print("h sopt10", repr(S))
# (i) design params B=256, ebn0=4, mu=0.08, omega=6, lambda=50
th=1+5/50; snr=2*4*0.08*8; D=math.log(1+th*snr)/(2*th)-0.08*math.log(256)
print("i", repr(D), repr(th*snr**2/((1+th*snr)*D)), repr(min(D/(3*snr),0.5)))
