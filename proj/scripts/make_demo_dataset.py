"""Regenerate data/demo: a small synthetic dataset with a matching mock fixture."""

import json
import random
from pathlib import Path

SCENES = [
    ("A man is standing in a kitchen next to a stove.", 2),
    ("A woman is pouring batter into a hot pan.", 4),
    ("A dog is running across a grassy field.", 3),
    ("A close up of a bicycle wheel on a road.", 1),
    ("A crowd is cheering at a stadium.", 5),
    ("A car is parked on the side of a street.", 1),
    ("A boy is jumping off a wooden dock into a lake.", 5),
    ("A group of people are sitting around a table.", 2),
    ("A person is changing a tire on a car.", 4),
    ("A view of a city skyline at night.", 3),
]


def main(root: Path, seed: int = 7) -> None:
    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    fixture = {"captions": {}, "answers": {}, "hidden_size": 16, "seed": seed}
    for caption, importance in SCENES:
        fixture["answers"][caption] = f"score: {2 * importance}"
    manifest = ["#llmvs-dataset v1"]
    for v in range(8):
        vid = f"video_{v:02d}"
        shots, t = [], 0
        for _ in range(rng.randint(4, 7)):
            length = rng.randint(5, 10)
            shots.append((t, t + length - 1, rng.randrange(len(SCENES))))
            t += length
        T = t
        manifest.append(f"{vid} {T}")
        d = root / vid
        d.mkdir(exist_ok=True)
        refs = [f"{vid}/frame_{i:04d}.jpg" for i in range(T)]
        (d / "frames.txt").write_text("".join(r + "\n" for r in refs))
        scene_of = [0] * T
        for s, e, k in shots:
            for i in range(s, e + 1):
                scene_of[i] = k
        for i, r in enumerate(refs):
            fixture["captions"][r] = SCENES[scene_of[i]][0]
        if v % 4 != 3:
            (d / "change_points.txt").write_text(
                f"#llmvs-change-points v1 shots={len(shots)}\n"
                + "".join(f"{s},{e}\n" for s, e, _ in shots))
        rows = [f"#llmvs-features v1 frames={T} dims={len(SCENES)}"]
        for i in range(T):
            feats = [rng.gauss(0.0, 0.05) for _ in SCENES]
            feats[scene_of[i]] += 1.0
            rows.append(" ".join(f"{x:.6f}" for x in feats))
        (d / "features.txt").write_text("\n".join(rows) + "\n")
        users = 3
        if v < 6:
            lines = ["#llmvs-annotations v1", f"mode=per-user-scores users={users} frames={T} scale=1,5"]
            for _ in range(users):
                row = [min(5, max(1, SCENES[scene_of[i]][1] + rng.choice([-1, 0, 0, 1]))) for i in range(T)]
                lines.append(" ".join(str(x) for x in row))
        else:
            lines = ["#llmvs-annotations v1", f"mode=averaged-summary users={users} frames={T}"]
            ranked = sorted(range(len(shots)), key=lambda k: -SCENES[shots[k][2]][1] - rng.random())
            for _ in range(users):
                keep = set(ranked[:2]) if rng.random() < 0.7 else set(ranked[1:3])
                row = [0] * T
                for k in keep:
                    s, e, _ = shots[k]
                    for i in range(s, e + 1):
                        row[i] = 1
                lines.append(" ".join(str(x) for x in row))
        (d / "annotations.txt").write_text("\n".join(lines) + "\n")
    (root / "manifest.tsv").write_text("\n".join(manifest) + "\n")
    (root / "mock_fixture.json").write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(Path(__file__).resolve().parent.parent / "data" / "demo")
