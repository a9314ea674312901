"""Synthetic heterogeneous JSON collection and a raw-scan oracle over it.

The files mimic database exports: several record shapes, dates in three
formats, non-numeric values mixed into numeric fields.  The oracle reads the
files back with :mod:`json` alone and answers each battery question in plain
Python.
"""

import datetime as dt
import json
import os
import random
from collections import Counter

CITIES = ["NEW YORK", "BROOKLYN", "WEST NEW YORK", "NEW ROCHELLE", "BRONX", "YORK"]
CATEGORIES = ["nanotech", "web", "biotech", "cleantech", None, "semiconductor nanotech"]
RESULTS = ["Pass", "Fail", "Violation Issued", "No Violation Issued", "Warning"]
NAMES = ["Ada", "Brook", "Chen", "Dara", "Emil", "Fumi", "Gita", "Hal"]
MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def _day(rng):
    if rng.random() < 0.5:
        return dt.date(2008, 11, 25) + dt.timedelta(days=rng.randint(0, 10))
    return dt.date(rng.randint(2005, 2011), rng.randint(1, 12), rng.randint(1, 28))


def _ms(d):
    midday = dt.datetime(d.year, d.month, d.day, 12) - dt.datetime(1970, 1, 1)
    return int(midday.total_seconds() * 1000)


def make_collection(root, seed=3):
    """Write the collection under ``root``; returns the file paths."""
    rng = random.Random(seed)
    os.makedirs(root, exist_ok=True)
    files = {}

    def words(n):
        return " ".join(rng.choice(["alpha", "beta", "gamma", "delta", "omega"]) for _ in range(n))

    restaurants = [{"name": f"R{i} {words(2)}",
                    "rating": rng.choice([0, 1, 2, 3, 4, 5, 2.5, 3.5, "Not yet rated"]),
                    "address": {"zip": f"10{rng.randint(0, 999):03d}", "street": words(1)}}
                   for i in range(300)]
    zips = [{"city": rng.choice(CITIES), "zip": f"1{rng.randint(0, 9999):04d}",
             "pop": rng.randint(0, 90000), "loc": [rng.uniform(-74, -73), rng.uniform(40, 41)]}
            for _ in range(400)]
    companies = []
    for i in range(200):
        c = {"name": f"Co{i} {words(1)}", "category_code": rng.choice(CATEGORIES),
             "offices": [{"name": f"office {j}"} for j in range(rng.randint(0, 2))]}
        if rng.random() < 0.8:
            c["created_at"] = {"$date": _ms(_day(rng))}
        companies.append(c)
    books = []
    for i in range(150):
        b = {"title": f"Book {i}: {words(3)}",
             "authors": [rng.choice(NAMES) for _ in range(rng.randint(0, 3))]}
        r = rng.random()
        if r < 0.6:
            b["created"] = _day(rng).isoformat()
        elif r < 0.9:
            b["created"] = {"$date": _ms(_day(rng))}
        books.append(b)
    trades = [{"ticker": rng.choice(["ABC", "XYZ", "QQQ"]), "price": rng.randint(1, 500) / 4,
               "qty": rng.randint(1, 1000)} for _ in range(3000)]
    inspections = []
    for i in range(500):
        d = _day(rng)
        inspections.append({"business_name": f"Biz {i}", "result": rng.choice(RESULTS),
                            "date": f"{MONTHS[d.month - 1]} {d.day} {d.year}"})
    inspections.append({"business_name": "Undated", "result": "Pass", "date": "unknown"})

    def lines(name, docs):
        path = os.path.join(root, name)
        with open(path, "w") as fh:
            fh.write("\n".join(json.dumps(d) for d in docs) + "\n")
        files[name] = path

    path = os.path.join(root, "restaurant.json")
    with open(path, "w") as fh:
        json.dump(restaurants, fh, indent=1)
    files["restaurant.json"] = path
    lines("zips.json", zips)
    lines("companies.json", companies)
    lines("books.json", books)
    lines("trades.json", trades)
    lines("city_inspections.json", inspections)
    return files


# date fields, as path features, that the battery unifies
DATE_FIELDS = [":date:", ":created_at:$date:", ":created:", ":created:$date:"]


# -- the oracle ---------------------------------------------------------------

def load(path):
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _date_of(value):
    if isinstance(value, dict) and "$date" in value:
        value = value["$date"]
    if isinstance(value, int):
        return (dt.datetime(1970, 1, 1) + dt.timedelta(milliseconds=value)).date()
    if isinstance(value, str):
        for fmt in ("%Y-%m-%d", "%b %d %Y"):
            try:
                return dt.datetime.strptime(value, fmt).date()
            except ValueError:
                pass
    return None


def _created(obj):
    for key in ("date", "created_at", "created"):
        if key in obj:
            return _date_of(obj[key])
    return None


def _has_phrase(text, phrase):
    words, target = text.lower().split(), phrase.split()
    return any(words[i:i + len(target)] == target for i in range(len(words)))


def oracle(files):
    data = {name: load(path) for name, path in files.items()}
    ratings = [r["rating"] for r in data["restaurant.json"]
               if isinstance(r["rating"], (int, float))]
    out = {
        1: (min(ratings), sum(ratings) / len(ratings), max(ratings)),
        2: sum(1 for z in data["zips.json"] if _has_phrase(z["city"], "new york")),
        3: [c["name"] for c in data["companies.json"]
            if c["category_code"] and "nanotech" in c["category_code"].split()],
        4: [(b["title"], a) for b in data["books.json"] for a in b["authors"]],
        5: len(data["trades.json"]),
        6: Counter(i["result"] for i in data["city_inspections.json"]),
        7: sum(len(v) for v in data.values()),
        8: [b["title"] for b in data["books.json"]
            if _created(b) is not None and _created(b).year == 2008],
        9: sum(1 for docs in data.values() for o in docs
               if _created(o) == dt.date(2008, 12, 1)),
    }
    return out
