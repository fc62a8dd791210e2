#!/usr/bin/env python3
"""Convert the Kaggle Instacart CSV dump into the toolkit's input files.

Input directory must contain the 2017 "Instacart Market Basket Analysis"
files: orders.csv, order_products__prior.csv, order_products__train.csv,
products.csv, departments.csv, aisles.csv.

Writes into the output directory:
  orders.tsv             user_id<TAB>order_id<TAB>order_number<TAB>product_id
                         (time is the per-user order ordinal; rows are sorted
                         by user, order number, add-to-cart position)
  item_context.tsv       product_id<TAB>product-name tokens
  labels_department.tsv  product_id<TAB>department   (coarse labels)
  labels_aisle.tsv       product_id<TAB>aisle        (fine labels)

Name tokens are lowercased alphanumeric runs; department and aisle are kept
out of the context tokens so the classification probe has no label leak.
"""

import argparse
import csv
import re
import sys
from pathlib import Path

TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(name: str) -> list[str]:
    return TOKEN_RE.findall(name.lower())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input_dir", type=Path, help="directory with the Kaggle CSV files")
    ap.add_argument("output_dir", type=Path, help="where to write the TSV files")
    args = ap.parse_args()

    src = args.input_dir
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)

    for required in ("orders.csv", "order_products__prior.csv",
                     "order_products__train.csv", "products.csv",
                     "departments.csv", "aisles.csv"):
        if not (src / required).exists():
            print(f"error: missing {src / required}", file=sys.stderr)
            return 2

    departments = {}
    with open(src / "departments.csv", newline="") as f:
        for row in csv.DictReader(f):
            departments[row["department_id"]] = row["department"].strip()
    aisles = {}
    with open(src / "aisles.csv", newline="") as f:
        for row in csv.DictReader(f):
            aisles[row["aisle_id"]] = row["aisle"].strip()

    with open(src / "products.csv", newline="") as f, \
         open(out / "item_context.tsv", "w") as ctx, \
         open(out / "labels_department.tsv", "w") as dep, \
         open(out / "labels_aisle.tsv", "w") as ais:
        for row in csv.DictReader(f):
            pid = row["product_id"]
            tokens = tokenize(row["product_name"])
            ctx.write(f"{pid}\t{' '.join(tokens)}\n")
            dep.write(f"{pid}\t{departments.get(row['department_id'], 'unknown')}\n")
            ais.write(f"{pid}\t{aisles.get(row['aisle_id'], 'unknown')}\n")

    # order_id -> (user_id, order_number); the Kaggle 'test' rows carry no
    # product lists and are skipped.
    order_meta = {}
    with open(src / "orders.csv", newline="") as f:
        for row in csv.DictReader(f):
            if row["eval_set"] == "test":
                continue
            order_meta[row["order_id"]] = (row["user_id"], int(row["order_number"]))

    events = []  # (user, order_number, cart_pos, order_id, product_id)
    for part in ("order_products__prior.csv", "order_products__train.csv"):
        with open(src / part, newline="") as f:
            for row in csv.DictReader(f):
                meta = order_meta.get(row["order_id"])
                if meta is None:
                    continue
                user, number = meta
                events.append((int(user), number, int(row["add_to_cart_order"]),
                               row["order_id"], row["product_id"]))

    events.sort()
    with open(out / "orders.tsv", "w") as f:
        for user, number, _pos, order_id, product_id in events:
            f.write(f"{user}\t{order_id}\t{number}\t{product_id}\n")

    print(f"wrote {len(events)} events for {len({e[0] for e in events})} users "
          f"to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
