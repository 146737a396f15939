"""Write the Letter2k train/test CSV files used by the reproduction test.

The UCI Letter Recognition data (20000 samples, 16 integer features, labels
A-Z) is taken from the copy bundled in the `keel_ds` wheel on PyPI. The last
2000 rows form the training set and the first 18000 the test set.

    python3 scripts/fetch_letter.py [OUT_DIR]
"""

import pathlib
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "keel_ds/data/balanced/raw/letter.dat"


def main() -> None:
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/letter")
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "keel_ds==0.2.5"],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("keel_ds-*.whl"))
        text = zipfile.ZipFile(wheel).read(MEMBER).decode()
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("@")]
    if len(rows) != 20000:
        raise SystemExit(f"expected 20000 samples, found {len(rows)}")
    (out / "letter2k-train.csv").write_text("\n".join(rows[-2000:]) + "\n")
    (out / "letter2k-test.csv").write_text("\n".join(rows[:-2000]) + "\n")
    print(f"wrote {out}/letter2k-train.csv (2000) and {out}/letter2k-test.csv (18000)")


if __name__ == "__main__":
    main()
