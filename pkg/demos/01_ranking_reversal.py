"""Why the ranking has to depend on the nominal level.

Two units, both with a = 1.  Unit A has a slightly weaker signal but a much
larger power weight b.  Posterior odds ignore alpha and always put A first;
the value-to-cost ratio (and the bounded R statistic that orders the same
way) prefers A at alpha = 0.01 and B at alpha = 0.05.

Run:  python demos/01_ranking_reversal.py
"""
from wfdr.cli import ranking_demo

for alpha in (0.01, 0.05):
    rows, order = ranking_demo(alpha)
    print(f"\nalpha = {alpha}")
    print(f"{'unit':<5}{'Lfdr':>7}{'b':>8}{'WPO':>9}{'VCR':>9}{'R':>11}")
    for r in rows:
        print(f"{r['unit']:<5}{r['lfdr']:>7.3f}{r['b']:>8.2f}{r['wpo']:>9.4f}{r['vcr']:>9.1f}{r['r']:>11.6f}")
    print("ranked by R:", " > ".join(order))

# At alpha = 0.01 unit B's Lfdr (0.055) is far above alpha, so rejecting it
# eats a lot of the error budget relative to A's.  At 0.05 B sits almost at
# the boundary and becomes the cheaper rejection per unit of gain.
