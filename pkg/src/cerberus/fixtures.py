"""Deterministic synthetic batches.

``TABLE_WIDTHS`` fixes the byte width of every degree field so that the
degree_info text is 136 bytes (132 of content plus four separators), which
puts a degree_code at exactly 214 + 32 * tree height bytes.
"""
from __future__ import annotations

import random
from decimal import Decimal

from .credential import Course, DegreeInfo, IdTranscriptInfo, StudentRecord

TABLE_WIDTHS = {"name": 40, "serial": 16, "title": 40, "year": 4, "university": 32}

_FIRST = ["Alice", "Bilal", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hina", "Ivan", "Jun",
          "Kamala", "Luis", "Maryam", "Nikolai", "Omar", "Priya", "Quentin", "Rosa", "Sami"]
_LAST = ["Ahmed", "Baker", "Castillo", "Dubois", "Eriksen", "Fischer", "Gupta", "Haq",
         "Ibrahim", "Jensen", "Khan", "Lopez", "Moreau", "Nakamura", "Okafor", "Tariq"]
_TITLES = ["Bachelor of Science in Computer Science", "Bachelor of Engineering (Electrical)",
           "Master of Science in Information Security", "Bachelor of Business Administration"]
_COURSES = [("CS101", "Introduction to Programming"), ("CS201", "Data Structures"),
            ("CS250", "Discrete Mathematics"), ("CS301", "Algorithms"),
            ("CS320", "Operating Systems"), ("CS330", "Computer Networks"),
            ("CS340", "Databases"), ("CS410", "Information Security"),
            ("MA101", "Calculus I"), ("MA102", "Linear Algebra"), ("HU100", "Technical Writing"),
            ("CS450", "Distributed Systems")]
_GRADES = ["A", "A-", "B+", "B", "B-", "C+", "C"]


def _fit(text: str, width: int, rng: random.Random) -> str:
    text = text[:width]
    while len(text) < width:
        text += rng.choice("abcdefghijklmnopqrstuvwxyz")
    return text


def _grade_point(rng: random.Random) -> Decimal:
    return Decimal(rng.randint(200, 400)) / 100


def make_record(i: int, rng: random.Random, *, university: str = "National University",
                year: int = 2020, courses: int = 10, fixed_width: bool = True,
                canary: str | None = None) -> StudentRecord:
    name = f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"
    serial = f"D{year}-{i:06d}"
    title = rng.choice(_TITLES)
    uni = university
    if canary:
        name, title, uni = f"{canary}-NAME-{i}", f"{canary}-TITLE", f"{canary}-UNI"
        serial = f"{canary}-S{i:05d}"
    if fixed_width:
        w = TABLE_WIDTHS
        name, serial = _fit(name, w["name"], rng), _fit(serial, w["serial"], rng)
        title, uni = _fit(title, w["title"], rng), _fit(uni, w["university"], rng)
    picked = rng.sample(_COURSES, k=min(courses, len(_COURSES)))
    course_list = []
    for code, ctitle in picked:
        if canary:
            code, ctitle = f"{canary}-C{code}", f"{canary}-CT-{ctitle}"
        course_list.append(Course(code, ctitle, Decimal(rng.choice([2, 3, 4]))))
    grades = [f"{canary}-G{g}" if canary else g for g in (rng.choice(_GRADES) for _ in picked)]
    id_number = f"{canary}-ID-{i}" if canary else f"{rng.randint(10**12, 10**13 - 1)}"
    return StudentRecord(
        DegreeInfo(name, serial, title, year, uni),
        IdTranscriptInfo(id_number, tuple(course_list), tuple(grades),
                         _grade_point(rng), _grade_point(rng)),
    )


def make_batch(n: int, seed: int = 0, **kwargs) -> list[StudentRecord]:
    rng = random.Random(seed)
    return [make_record(i, rng, **kwargs) for i in range(n)]
