"""
nlmodes figure-data runs

One run config per figure under figures/, plus run_figures.sh:
- fig1/fig2: pendulum family and ramped-forcing comparison
- fig3/fig4: planar population family and resonance sweep
- fig5/fig7: power-network mode families, psi_3 levels and the two-mode lattice
"""
