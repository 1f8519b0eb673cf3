import sys, time
import numpy as np
from concurrent.futures import ProcessPoolExecutor
from gridleague.env import play_scripted_match

def run_one(args):
    a, b, seed, variant = args
    g = play_scripted_match(a, b, seed, variant, record_events=False)
    w = g.outcome.winner
    return (a, b, 1.0 if w == 0 else 0.0 if w == 1 else 0.5, g.outcome.end_step)

def matrix(pairs, n=40, variants=("triton_toy",)):
    jobs = []
    for a, b in pairs:
        for s in range(n):
            jobs.append((a, b, 1000 + s, variants[s % len(variants)]))
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=8) as ex:
        results = list(ex.map(run_one, jobs, chunksize=4))
    agg = {}
    for a, b, w, es in results:
        agg.setdefault((a, b), []).append((w, es))
    for (a, b), rows in agg.items():
        ws = [r[0] for r in rows]
        es = [r[1] for r in rows]
        print(f"{a:9s} vs {b:9s}: P0 winrate {np.mean(ws):.2f}  mean end {np.mean(es):7.0f}")
    print(f"({time.time()-t0:.1f}s)")

if __name__ == "__main__":
    pairs = [("RUSH","ECON"), ("ECON","BALANCED"), ("BALANCED","RUSH")]
    if len(sys.argv) > 1 and sys.argv[1] == "full":
        archs = ["RUSH","ECON","BALANCED","TURTLE"]
        pairs = [(a,b) for a in archs for b in archs if a != b]
    matrix(pairs, n=int(sys.argv[2]) if len(sys.argv) > 2 else 40)
