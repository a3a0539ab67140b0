#!/usr/bin/env python3
"""Regenerates the fixture corpus. Deterministic (fixed seed).

Writes the dictionary, the 480-entry annotated corpus, recipes, mock
backend tables, the word-count table for the rarity check, the agreement
matrix, the OCR page with its hand-labelled pairs and the expected values
computed here with exact fractions. Golden pipeline outputs and the shipped
caches are produced afterwards by the CLI (see README).
"""

import json
import math
import os
import random
import re
from fractions import Fraction

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(20240601)


def path(*parts):
    p = os.path.join(HERE, *parts)
    os.makedirs(os.path.dirname(p), exist_ok=True)
    return p


def dump_jsonl(rows, *parts):
    with open(path(*parts), "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def dump_tsv(pairs, *parts):
    with open(path(*parts), "w", encoding="utf-8", newline="\n") as f:
        for k, v in pairs:
            f.write(f"{k}\t{v}\n")


# (zh, en, round-trip zh)
METHODS = [
    ("清蒸", "Steamed", "清蒸"), ("红烧", "Braised", "炖"), ("干煸", "Dry-Fried", "干炒"),
    ("水煮", "Poached", "水煮"), ("爆炒", "Stir-Fried", "炒"), ("香煎", "Pan-Fried", "煎"),
    ("凉拌", "Cold Tossed", "凉拌"), ("蒜蓉", "Garlic", "大蒜"), ("椒盐", "Salt and Pepper", "椒盐"),
    ("糖醋", "Sweet and Sour", "糖醋"), ("酸辣", "Hot and Sour", "酸辣"), ("清炒", "Sauteed", "清炒"),
    ("油焖", "Oil-Braised", "油焖"), ("葱爆", "Scallion", "葱"), ("黑椒", "Black Pepper", "黑胡椒"),
]
INGREDIENTS = [
    ("鸡丁", "Diced Chicken", "鸡丁"), ("牛肉", "Beef", "牛肉"), ("豆腐", "Tofu", "豆腐"),
    ("茄子", "Eggplant", "茄子"), ("鲈鱼", "Sea Bass", "海鲈鱼"), ("虾仁", "Shrimp", "虾"),
    ("排骨", "Spare Ribs", "排骨"), ("肉丝", "Shredded Pork", "猪肉丝"), ("土豆丝", "Shredded Potato", "土豆丝"),
    ("青菜", "Greens", "青菜"), ("鸡翅", "Chicken Wings", "鸡翅"), ("羊肉", "Lamb", "羊肉"),
    ("鱿鱼", "Squid", "鱿鱼"), ("豆角", "Green Beans", "青豆"), ("蘑菇", "Mushrooms", "蘑菇"),
    ("西兰花", "Broccoli", "西兰花"), ("猪肝", "Pork Liver", "猪肝"), ("黄瓜", "Cucumber", "黄瓜"),
    ("鸭肉", "Duck", "鸭肉"), ("带鱼", "Hairtail", "带鱼"),
]
CONCRETE = [
    ("腊肉", "Chinese Bacon", "培根"), ("豆豉", "Black Bean", "黑豆"), ("年糕", "Rice Cake", "米糕"),
    ("粽子", "Zongzi", "粽子"), ("饺子", "Dumplings", "饺子"), ("馄饨", "Wontons", "云吞"),
    ("腐乳", "Fermented Tofu", "发酵豆腐"), ("榨菜", "Preserved Mustard", "咸菜"), ("皮蛋", "Century Egg", "世纪蛋"),
    ("米线", "Rice Noodles", "米粉"), ("油条", "Fried Dough Stick", "炸面棍"), ("凉皮", "Cold Skin Noodles", "凉面"),
]
CREATIVE = [
    ("宫保", "Kung Pao", "宫保"), ("鱼香", "Fish-Fragrant", "鱼味"), ("麻婆", "Mapo", "麻婆"),
    ("口水", "Mouth-Watering", "流口水"), ("怪味", "Strange-Flavor", "奇怪味道"), ("回锅", "Twice-Cooked", "两次煮"),
    ("干锅", "Dry Pot", "干锅"), ("水晶", "Crystal", "水晶"), ("金汤", "Golden Broth", "金色汤"),
    ("白切", "White-Cut", "白切"), ("三杯", "Three-Cup", "三杯"), ("酱爆", "Sauce-Blasted", "酱炒"),
]
ABSTRACT = [
    ("佛跳墙", "Buddha Jumps Over the Wall", "佛跳过墙"), ("蚂蚁上树", "Ants Climbing a Tree", "蚂蚁爬树"),
    ("狮子头", "Lion's Head", "狮子的头"), ("夫妻肺片", "Husband and Wife Lung Slices", "夫妻肺切片"),
    ("龙凤呈祥", "Dragon and Phoenix", "龙和凤凰"), ("霸王别姬", "Farewell My Concubine", "告别我的妾"),
    ("全家福", "Family Happiness", "全家幸福"), ("叫花鸡", "Beggar's Chicken", "乞丐鸡"),
    ("东坡肉", "Dongpo Pork", "东坡猪肉"), ("满堂红", "Full House Red", "满屋红"),
    ("翡翠白玉", "Jade and White Jade", "翡翠和白玉"), ("猫耳朵", "Cat's Ears", "猫的耳朵"),
    ("老虎菜", "Tiger Salad", "老虎沙拉"), ("过桥米线", "Crossing-the-Bridge Noodles", "过桥面"),
    ("步步高升", "Rising Step by Step", "一步一步升高"), ("五福临门", "Five Blessings", "五福到门"),
    ("年年有余", "Surplus Every Year", "每年有剩余"), ("花好月圆", "Flowers and Full Moon", "花和满月"),
    ("金玉满堂", "Gold and Jade", "金子和玉"), ("鸿运当头", "Good Fortune Ahead", "好运在前"),
    ("游龙戏凤", "Dragon Teasing Phoenix", "龙戏凤凰"), ("八仙过海", "Eight Immortals Crossing the Sea", "八个神仙过海"),
    ("红红火火", "Prosperous Fire", "繁荣的火"), ("大展宏图", "Grand Plan", "宏伟计划"),
]
PREFIXES = [("", "", ""), ("招牌", "Signature", "招牌"), ("秘制", "Secret Recipe", "秘方"),
            ("家常", "Home-Style", "家常"), ("特色", "Special", "特色")]


def build_dishes():
    dishes = []  # (zh, en, rtt_zh, label, span_start, span_len)
    plain = [(m, i) for m in METHODS for i in INGREDIENTS]
    for m, i in rng.sample(plain, 120):
        dishes.append((m[0] + i[0], f"{m[1]} {i[1]}", m[2] + i[2], 0, 0, 0))
    for c, i in rng.sample([(c, i) for c in CONCRETE for i in INGREDIENTS], 120):
        dishes.append((c[0] + i[0], f"{i[1]} with {c[1]}", c[2] + i[2], 1, 0, len(c[0])))
    for c, i in rng.sample([(c, i) for c in CREATIVE for i in INGREDIENTS], 120):
        dishes.append((c[0] + i[0], f"{c[1]} {i[1]}", c[2] + i[2], 2, 0, len(c[0])))
    for a in ABSTRACT:
        for p in PREFIXES:
            en = f"{p[1]} {a[1]}".strip()
            dishes.append((p[0] + a[0], en, p[2] + a[2], 3, len(p[0]), len(a[0])))
    rng.shuffle(dishes)
    return dishes


def annotations_for(entry_id, zh, label, start, length):
    """Five annotators; at most two dissent, so the majority label and span
    are always the intended ones."""
    anns = []
    dissent = rng.choices([0, 1, 2], weights=[50, 35, 15])[0]
    stretch = dissent == 0 and label > 0 and start + length < len(zh) and rng.random() < 0.3
    dissenters = set(rng.sample(range(5), dissent))
    stretcher = rng.randrange(5) if stretch else -1
    for k in range(5):
        if k in dissenters:
            lab = rng.choice([c for c in range(4) if c != label])
            if lab == 0:
                spans = []
            else:
                spans = [(0, len(zh))]
        else:
            lab = label
            if label == 0:
                spans = []
            elif k == stretcher:
                spans = [(start, len(zh))]
            else:
                spans = [(start, start + length)]
        anns.append({
            "entry_id": entry_id,
            "label": lab,
            "spans": [{"start": s, "end": e, "surface": zh[s:e]} for s, e in spans],
            "annotator_id": f"a{k + 1}",
        })
    return anns


def write_corpus(dishes):
    entries, anns = [], []
    for n, (zh, en, _rtt, label, start, length) in enumerate(dishes, 1):
        eid = f"e{n:04d}"
        entries.append({"id": eid, "zh_text": zh, "en_ref": en, "price": None,
                        "restaurant_id": f"r{(n % 7) + 1:02d}", "source": "fixture"})
        anns.extend(annotations_for(eid, zh, label, start, length))
    dump_jsonl(entries, "corpus", "entries.jsonl")
    dump_jsonl(anns, "corpus", "annotations.jsonl")
    return entries


def write_dictionary(dishes):
    words = {}

    def add(w, f):
        if w:
            words[w] = max(words.get(w, 0), f)

    for zh, _, back in METHODS + INGREDIENTS + CONCRETE + CREATIVE:
        add(zh, rng.randint(200, 3000))
        add(back, rng.randint(200, 3000))
    for zh, _, back in ABSTRACT:
        add(zh, rng.randint(15, 60))
    for zh, _, back in PREFIXES:
        add(zh, rng.randint(300, 900))
        add(back, rng.randint(300, 900))
    for w in ["蚂蚁", "上树", "狮子", "夫妻", "肺片", "龙凤", "凤凰", "霸王", "全家", "叫花", "东坡",
              "满堂", "翡翠", "白玉", "耳朵", "老虎", "过桥", "步步", "高升", "五福", "临门", "年年",
              "有余", "花好", "月圆", "金玉", "鸿运", "当头", "游龙", "戏凤", "八仙", "过海", "红火",
              "大展", "宏图", "跳过", "幸福", "乞丐", "猪肉", "沙拉", "神仙", "剩余", "满月", "金子",
              "好运", "繁荣", "宏伟", "计划", "告别", "切片", "一步", "升高", "每年", "味道", "奇怪",
              "发酵", "世纪", "炸面", "两次", "金色", "海鲈鱼", "黑胡椒", "大蒜", "土豆", "食材", "调料",
              "酱油", "料酒", "白糖", "生姜", "大火", "小火", "出锅", "装盘", "翻炒", "焯水", "腌制"]:
        add(w, rng.randint(100, 2000))
    for ch in "鱼肉鸡上树头墙汤饭面菜炒煮蒸煎炖的和在到门火玉花月红金龙凤猫虎佛福蛋豆米糕":
        add(ch, rng.randint(500, 8000))
    dump_tsv(sorted(words.items()), "dict.tsv")


def write_reference_counts():
    """Menu-corpus word counts with a long tail: staples are common, a few
    idioms and creative names are rare."""
    counts = {}
    for zh, _, _ in METHODS + INGREDIENTS:
        counts[zh] = rng.randint(60, 4000)
    for zh, _, _ in PREFIXES[1:]:
        counts[zh] = rng.randint(200, 900)
    for zh, _, _ in CONCRETE:
        counts[zh] = rng.randint(20, 400)
    for zh, _, _ in CREATIVE:
        counts[zh] = rng.randint(8, 150)
    for i, (zh, _, _) in enumerate(ABSTRACT):
        counts[zh] = 1 + i % 3 if i % 4 == 0 else rng.randint(4, 60)
    dump_tsv(sorted(counts.items()), "corpus", "word_counts.tsv")


def write_mock_tables(dishes):
    fwd, rev, chat = {}, {}, {}
    for zh, en, back, *_ in dishes:
        fwd[zh] = en
        rev[en] = back
        chat[zh] = en
    fwd["主厨推荐"] = "Chef's Recommendations"
    fwd["时令小菜"] = "Seasonal Small Dishes"
    dump_tsv(sorted(fwd.items()), "mock", "mt_fwd.tsv")
    dump_tsv(sorted(rev.items()), "mock", "mt_rev.tsv")
    dump_tsv(sorted(chat.items()), "mock", "chat.tsv")

    zh_pages = {}
    for i, (zh, _, _) in enumerate(ABSTRACT):
        zh_pages[zh] = "历史|做法" if i % 2 == 0 else "做法|特点"
    for zh in ["粽子", "饺子", "年糕", "皮蛋", "油条", "宫保", "麻婆"]:
        zh_pages[zh] = "历史|做法"
    for zh in ["腊肉", "米线", "凉皮", "回锅", "干锅"]:
        zh_pages[zh] = "制作|特点"
    for zh in ["宫保鸡丁", "麻婆豆腐", "鱼香肉丝", "口水鸡翅"]:
        zh_pages[zh] = "历史|做法|相关"
    for zh, _, _ in INGREDIENTS:
        zh_pages[zh] = "营养|烹饪"
    zh_pages["豆腐"] = "历史|营养"
    en_pages = {"蚂蚁上树": "History|Preparation", "狮子头": "History", "东坡肉": "Origin|History",
                "夫妻肺片": "Preparation", "馄饨": "History|Varieties"}
    dump_tsv(sorted(zh_pages.items()), "mock", "wiki_zh.tsv")
    dump_tsv(sorted(en_pages.items()), "mock", "wiki_en.tsv")


SEASONING = ["酱油", "料酒", "白糖", "生姜", "大蒜", "黑胡椒"]


def write_recipes():
    recipes = []
    pool = [c for c in CONCRETE + CREATIVE] + [a for a in ABSTRACT[:14]]
    picks = rng.sample(pool, 30)
    for n in range(50):
        if n < 30:
            key = picks[n]
            ing = rng.choice(INGREDIENTS)
            name = key[0] + ing[0] if key in CONCRETE + CREATIVE else key[0]
        else:
            m, ing = rng.choice(METHODS), rng.choice(INGREDIENTS)
            name = m[0] + ing[0]
        steps = [f"将{ing[0]}洗净切块，焯水备用。"]
        for _ in range(rng.randint(1, 4)):
            steps.append(f"加入{rng.choice(SEASONING)}腌制{rng.randint(5, 30)}分钟。")
        steps.append(f"{rng.choice(['大火', '小火'])}翻炒{name}，出锅装盘。")
        recipes.append({"id": f"r{n + 1:03d}", "name": name, "instructions": "".join(steps)})
    dump_jsonl(recipes, "corpus", "recipes.jsonl")


def write_scores(entries, dishes):
    """Per-entry scores for three strategies. The baseline ('Original')
    category means are exactly 62.68 / 55.38 / 43.92."""
    by_cat = {1: [], 2: [], 3: []}
    for e, d in zip(entries, dishes):
        if d[3] > 0:
            by_cat[d[3]].append(e["id"])
    rows = []
    targets = {1: Fraction("62.68"), 2: Fraction("55.38"), 3: Fraction("43.92")}
    shifts = {"Recipe + EtT": (1.2, 2.1, 3.4), "Recipe + Equivalents": (2.0, 3.5, 6.1)}
    for cat, ids in by_cat.items():
        vals = [Fraction(round(rng.uniform(-15, 15) * 100), 100) + targets[cat] for _ in ids]
        drift = sum(vals) - targets[cat] * len(vals)
        vals[-1] -= drift
        assert sum(vals) / len(vals) == targets[cat]
        for eid, v in zip(ids, vals):
            rows.append((eid, "Original", v, cat))
            for label, sh in shifts.items():
                w = v + Fraction(round((sh[cat - 1] + rng.uniform(-5, 5)) * 100), 100)
                rows.append((eid, label, w, cat))
    rows.sort(key=lambda r: (r[0], r[1]))
    dump_jsonl([{"entry_id": e, "strategy": s, "score": float(v), "category": c} for e, s, v, c in rows],
               "corpus", "scores.jsonl")


def percentile(sorted_vals, q):
    rank = q * (len(sorted_vals) - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = Fraction(rank) - lo
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * frac


def write_word_counts():
    chars = "山水云风花雨雪月星石木林竹兰梅菊松柏桃李杏梨枣栗桂荷莲藕菱芋葱姜蒜椒茴"
    words = []
    for a in chars:
        for b in chars:
            if a != b:
                words.append(a + b)
    words = rng.sample(words, 200)
    counts = {}
    for i, w in enumerate(words):
        if i < 6:
            counts[w] = 1
        elif i < 40:
            counts[w] = rng.randint(2, 5)
        else:
            counts[w] = rng.randint(6, 400)
    dump_tsv(list(counts.items()), "cu", "counts.tsv")
    inv = sorted(Fraction(1, c) for c in counts.values())
    cutoff = percentile(inv, Fraction(95, 100))
    flagged = sorted(w for w, c in counts.items() if Fraction(1, c) > cutoff)
    with open(path("cu", "expected.json"), "w", encoding="utf-8") as f:
        json.dump({"cutoff_num": cutoff.numerator, "cutoff_den": cutoff.denominator,
                   "cutoff": float(cutoff), "flagged": flagged}, f, ensure_ascii=False, indent=1)
        f.write("\n")


def write_fleiss_matrix():
    rows = [[5, 0, 0, 0], [0, 4, 1, 0], [1, 1, 3, 0], [0, 0, 0, 5], [2, 2, 1, 0],
            [0, 3, 2, 0], [4, 0, 0, 1], [0, 0, 5, 0], [1, 1, 1, 2], [0, 5, 0, 0]]
    with open(path("kappa", "matrix_10x5.csv"), "w", newline="\n") as f:
        for r in rows:
            f.write(",".join(map(str, r)) + "\n")


NOTES = ["spicy", "serves two", "house favourite", "mild", "sharing plate"]


# --- OCR page -------------------------------------------------------------

def ocr_page(dishes):
    """Rows 1-10 stack Chinese over English. Rows 11-20 sit side by side,
    each with a small English note under the Chinese name: geometry alone
    prefers the note, the MT similarity prefers the name."""
    pool = [d for d in dishes]
    chosen = rng.sample(pool, 20)
    # one dish whose printed English shares no word with the MT output
    hard = next(d for d in dishes if d[0] == "佛跳墙")
    if hard in chosen:
        chosen.remove(hard)
    chosen = chosen[:15] + [hard] + chosen[15:19]
    blocks, gold = [], []
    page = "menu-p1"
    blocks.append({"text": "主厨推荐", "bbox": [60, 20, 180, 50], "page_id": page})
    blocks.append({"text": "Chef's Recommendations", "bbox": [200, 24, 460, 46], "page_id": page})
    blocks.append({"text": "est. 2023", "bbox": [640, 24, 720, 44], "page_id": page})
    prices = []
    y = 100
    for k, d in enumerate(chosen):
        zh, en = d[0], d[1]
        printed = "Fotiaoqiang Abalone Soup" if d is hard else en
        price = f"{rng.randint(6, 38)}.{rng.choice(['00', '50', '80', '95'])}"
        if k % 3 == 0:
            price = "£" + price
        if k < 10:
            zb = [60, y, 60 + 24 * len(zh), y + 24]
            eb = [60, y + 28, 60 + 9 * len(printed), y + 46]
            pb = [640, y + 12, 700, y + 34]
            y += 56
        else:
            if k == 10:
                blocks.append({"text": "时令小菜", "bbox": [60, y, 156, y + 24], "page_id": page})
                y += 60
            zb = [60, y, 60 + 24 * len(zh), y + 24]
            eb = [300, y + 3, 300 + 9 * len(printed), y + 21]
            pb = [640, y + 1, 700, y + 23]
            note = NOTES[k % len(NOTES)]
            blocks.append({"text": note, "bbox": [60, y + 27, 60 + 6 * len(note), y + 37], "page_id": page})
            y += 48
        blocks.append({"text": zh, "bbox": zb, "page_id": page})
        blocks.append({"text": printed, "bbox": eb, "page_id": page})
        blocks.append({"text": price, "bbox": pb, "page_id": page})
        gold.append({"price": price, "zh": zh, "en": printed})
        prices.append(price)
    order = list(range(len(blocks)))
    rng.shuffle(order)
    shuffled = [blocks[i] for i in order]
    with open(path("ocr", "page.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(shuffled, f, ensure_ascii=False, indent=1)
        f.write("\n")
    with open(path("ocr", "gold_pairs.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(gold, f, ensure_ascii=False, indent=1)
        f.write("\n")
    return shuffled


# Independent alignment oracle: enumerates every (Chinese, English) pair on
# the page, keeps those within the radius and takes the best score.

def is_cjk(c):
    o = ord(c)
    return 0x3400 <= o <= 0x4DBF or 0x4E00 <= o <= 0x9FFF or 0xF900 <= o <= 0xFAFF or 0x20000 <= o <= 0x2EBEF


def script(text):
    letters = [c for c in text if c.isalpha()]
    if not letters:
        return "other"
    cjk = sum(1 for c in letters if is_cjk(c))
    latin = sum(1 for c in letters if c.isascii() or 0xC0 <= ord(c) <= 0x24F)
    if 2 * cjk > len(letters):
        return "chinese"
    if 2 * latin > len(letters):
        return "english"
    return "mixed"


def bag(text):
    out, word = {}, ""
    for c in text + " ":
        if c.isalnum():
            word += c
        elif word:
            out[word.lower()] = out.get(word.lower(), 0.0) + 1.0
            word = ""
    return out


def cosine(a, b):
    a, b = bag(a), bag(b)
    dot = sum(x * b.get(w, 0.0) for w, x in sorted(a.items()))
    na = math.sqrt(sum(x * x for _, x in sorted(a.items())))
    nb = math.sqrt(sum(x * x for _, x in sorted(b.items())))
    if na == 0 or nb == 0:
        return 0.0
    return min(max(dot / (na * nb), 0.0), 1.0)


PRICE = re.compile(r"^[£$¥]?\s*(\d{1,3}\.\d{2})$")


def oracle_entries(blocks, fwd):
    key = lambda b: (b["page_id"], b["bbox"][1], b["bbox"][0], b["bbox"][3], b["bbox"][2], b["text"])
    ordered = sorted(blocks, key=key)
    heights = sorted(b["bbox"][3] - b["bbox"][1] for b in blocks)
    n = len(heights)
    median = heights[n // 2] if n % 2 else (heights[n // 2 - 1] + heights[n // 2]) / 2
    radius = 1.5 * median
    diag = math.sqrt(max(b["bbox"][2] for b in blocks) ** 2 + max(b["bbox"][3] for b in blocks) ** 2)
    cy = lambda b: (b["bbox"][1] + b["bbox"][3]) / 2
    cx = lambda b: (b["bbox"][0] + b["bbox"][2]) / 2
    anchors = [b for b in ordered if PRICE.match(b["text"].strip())]
    anchor_ids = {id(b) for b in anchors}
    entries = []
    for num, a in enumerate(anchors, 1):
        best = None
        for zi, z in enumerate(ordered):
            if id(z) in anchor_ids or script(z["text"]) != "chinese" or abs(cy(z) - cy(a)) > radius:
                continue
            for ei, e in enumerate(ordered):
                if id(e) in anchor_ids or script(e["text"]) != "english" or abs(cy(e) - cy(a)) > radius:
                    continue
                gap = math.sqrt((cx(z) - cx(e)) ** 2 + (cy(z) - cy(e)) ** 2) / diag
                score = cosine(fwd[z["text"]], e["text"]) - 0.5 * gap
                cand = (score, -gap, -zi, -ei)
                if best is None or cand > best[0]:
                    best = (cand, z, e)
        if best is None:
            continue
        value = float(PRICE.match(a["text"].strip()).group(1))
        entries.append({"id": f"{a['page_id']}-{num:04d}", "zh_text": best[1]["text"], "en_ref": best[2]["text"],
                        "price": value, "restaurant_id": None, "source": "ocr"})
    return entries


def main():
    dishes = build_dishes()
    entries = write_corpus(dishes)
    write_dictionary(dishes)
    write_reference_counts()
    write_mock_tables(dishes)
    write_recipes()
    write_scores(entries, dishes)
    write_word_counts()
    write_fleiss_matrix()
    blocks = ocr_page(dishes)
    fwd = {d[0]: d[1] for d in dishes}
    fwd["主厨推荐"] = "Chef's Recommendations"
    fwd["时令小菜"] = "Seasonal Small Dishes"
    ocr_entries = oracle_entries(blocks, fwd)
    dump_jsonl(ocr_entries, "golden", "ocr_entries.jsonl")
    # three annotators agreeing on the intended label of each OCR dish
    intended = {d[0]: d for d in dishes}
    anns = []
    for e in ocr_entries:
        _, _, _, label, start, length = intended[e["zh_text"]]
        spans = [] if label == 0 else [{"start": start, "end": start + length,
                                        "surface": e["zh_text"][start:start + length]}]
        for k in range(3):
            anns.append({"entry_id": e["id"], "label": label, "spans": spans, "annotator_id": f"o{k + 1}"})
    dump_jsonl(anns, "ocr", "annotations.jsonl")


if __name__ == "__main__":
    main()
