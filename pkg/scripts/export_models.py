"""Write the preset models as JSON documents into models/."""
import argparse
import json
from pathlib import Path

from martrep.laws import mixed_to_document
from martrep.models import FINITE_PRESETS, MIXED_PRESETS, document, finite_preset, mixed_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", default=str(Path(__file__).resolve().parent.parent / "models"))
    args = ap.parse_args()
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in FINITE_PRESETS:
        (out / f"{name}.json").write_text(json.dumps(document(finite_preset(name)), indent=1) + "\n")
    for name in MIXED_PRESETS:
        (out / f"mixed-{name}.json").write_text(json.dumps(mixed_to_document(mixed_preset(name)), indent=1) + "\n")
    print(f"wrote {len(FINITE_PRESETS) + len(MIXED_PRESETS)} models to {out}")


if __name__ == "__main__":
    main()
