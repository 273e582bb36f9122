"""Download the real benchmark datasets used by the acceptance spot check.

Creates ``data/bike.csv`` (UCI Bike Sharing, hourly counts, response
``cnt``) and ``data/concrete.csv`` (UCI Concrete Compressive Strength,
response ``strength``).  Needs ordinary internet access to
archive.ics.uci.edu; run it once, then
``pytest tests/test_acceptance.py -k real_data``.
"""

import io
import sys
import zipfile
from pathlib import Path
from urllib.request import urlopen

import pandas as pd

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

BIKE_URL = "https://archive.ics.uci.edu/static/public/275/bike+sharing+dataset.zip"
CONCRETE_URL = "https://archive.ics.uci.edu/static/public/165/concrete+compressive+strength.zip"

# hour.csv columns dropped: record id, raw date (redundant with its
# numeric encodings) and the casual/registered split that sums to cnt
BIKE_DROP = ["instant", "dteday", "casual", "registered"]

CONCRETE_COLUMNS = [
    "cement",
    "slag",
    "ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
    "age",
    "strength",
]


def fetch_zip(url):
    print(f"downloading {url}")
    with urlopen(url, timeout=60) as resp:
        return zipfile.ZipFile(io.BytesIO(resp.read()))


def build_bike():
    archive = fetch_zip(BIKE_URL)
    with archive.open("hour.csv") as fh:
        frame = pd.read_csv(fh)
    frame = frame.drop(columns=BIKE_DROP)
    out = DATA_DIR / "bike.csv"
    frame.to_csv(out, index=False)
    print(f"wrote {out} ({len(frame)} rows, response column 'cnt')")


def build_concrete():
    archive = fetch_zip(CONCRETE_URL)
    name = next(n for n in archive.namelist() if n.lower().endswith(".xls"))
    with archive.open(name) as fh:
        frame = pd.read_excel(fh)
    frame.columns = CONCRETE_COLUMNS
    out = DATA_DIR / "concrete.csv"
    frame.to_csv(out, index=False)
    print(f"wrote {out} ({len(frame)} rows, response column 'strength')")


def main():
    DATA_DIR.mkdir(exist_ok=True)
    try:
        build_bike()
        build_concrete()
    except OSError as exc:
        print(f"download failed: {exc}", file=sys.stderr)
        print(
            "this environment has no route to archive.ics.uci.edu; "
            "run the script somewhere with internet access and copy "
            "data/bike.csv and data/concrete.csv here",
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
