#!/usr/bin/env python3
"""Brute-force execution oracle for the metric benchmark.

Builds each fixture database with Python's sqlite3, runs gold and predicted SQL, and labels every
item with its execution match and error class. `--write FILE` stores the labels, `--check FILE`
compares against stored labels.
"""

import argparse
import collections
import json
import os
import sqlite3
import sys
import tempfile


def build(fixtures, db_id, root):
    target = os.path.join(root, db_id + ".sqlite")
    if not os.path.exists(target):
        with open(os.path.join(fixtures, db_id, db_id + ".sql"), encoding="utf-8") as f:
            conn = sqlite3.connect(target)
            conn.executescript(f.read())
            conn.commit()
            conn.close()
    return target


def run(db_path, sql):
    conn = sqlite3.connect(db_path)
    try:
        return "ok", conn.execute(sql).fetchall(), ""
    except sqlite3.Error as e:
        return "error", [], str(e)
    finally:
        conn.close()


def key(value):
    if value is None:
        return ("null",)
    if isinstance(value, (int, float)):
        return ("num", float(f"{float(value):.6e}"))
    if isinstance(value, bytes):
        return ("blob", value.hex())
    return ("text", value.strip())


def top_level_order_by(sql):
    depth = 0
    upper = sql.upper()
    i = 0
    in_quote = None
    while i < len(upper):
        ch = upper[i]
        if in_quote:
            if ch == in_quote:
                in_quote = None
        elif ch in "'\"`":
            in_quote = ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0 and upper.startswith("ORDER", i):
            rest = upper[i + 5:].lstrip()
            if rest.startswith("BY") and (i == 0 or not upper[i - 1].isalnum()):
                return True
        i += 1
    return False


def label(gold_status, gold_rows, pred_status, pred_rows, pred_error, ordered):
    gold_keys = [tuple(key(v) for v in r) for r in gold_rows]
    pred_keys = [tuple(key(v) for v in r) for r in pred_rows]
    ran = gold_status == "ok" and pred_status == "ok"
    if ran:
        match = gold_keys == pred_keys if ordered else collections.Counter(gold_keys) == collections.Counter(pred_keys)
    else:
        match = False
    if match:
        return True, "NONE"
    if gold_status != "ok":
        return False, "GOLD_ERROR"
    if pred_status != "ok":
        msg = pred_error.lower()
        schema = any(s in msg for s in ("no such column", "no such table", "ambiguous column name"))
        return False, "SCHEMA_LINKING_ERROR" if schema else "EXECUTION_ERROR"
    if not pred_rows:
        return False, "EMPTY_RESULT"
    return False, "WRONG_RESULT"


def labels(fixtures, items_path, predictions_path):
    with open(items_path, encoding="utf-8") as f:
        items = json.load(f)
    with open(predictions_path, encoding="utf-8") as f:
        predictions = {p["task_id"]: p["sql"] for p in json.load(f)}
    out = {}
    with tempfile.TemporaryDirectory() as tmp:
        for item in items:
            task_id = str(item["question_id"])
            db_path = build(fixtures, item["db_id"], tmp)
            gold = run(db_path, item["SQL"])
            pred = run(db_path, predictions[task_id])
            ex, error_class = label(gold[0], gold[1], pred[0], pred[1], pred[2], top_level_order_by(item["SQL"]))
            out[task_id] = {"ex": ex, "error_class": error_class}
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixtures", required=True)
    parser.add_argument("--items", required=True)
    parser.add_argument("--predictions", required=True)
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--write", metavar="FILE")
    mode.add_argument("--check", metavar="FILE")
    args = parser.parse_args()

    result = labels(args.fixtures, args.items, args.predictions)
    if args.write:
        with open(args.write, "w", encoding="utf-8") as f:
            json.dump(result, f, indent=2, sort_keys=True)
            f.write("\n")
        return 0
    with open(args.check, encoding="utf-8") as f:
        stored = json.load(f)
    if stored != result:
        for task_id in sorted(set(stored) | set(result), key=int):
            if stored.get(task_id) != result.get(task_id):
                print(f"item {task_id}: stored {stored.get(task_id)} oracle {result.get(task_id)}")
        return 1
    print(f"{len(result)} labels match")
    return 0


if __name__ == "__main__":
    sys.exit(main())
