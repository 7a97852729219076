#!/usr/bin/env python3
"""Regenerate the bundled sample corpus and lexicon (deterministic, seeded).

The corpus is Zipf-sampled English with realistic word-length statistics so
BPE calibration lands near real-text downsampling factors; the lexicon holds
inflection families and synonym clusters for the embedding probe.

Usage: python3 scripts/make_sample_data.py [out_dir]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from blockpool.rng import Rng

FUNCTION_WORDS = """the of and a to in is was it for on are as with his they at be this have
from or had by not but what all were when we there can an your which their said if do will
each about how up out them then she many some so these would other into has more her two
like him time no could new very my than first been its who now people down day did get
come made may part over say too any here must such through still our back much before
also around another came work three must because does most even place old well where""".split()

FAMILIES = [
    # (lemma, forms), synonym groups link lemmas below
    ("take", ["take", "takes", "taking", "took"]),
    ("grab", ["grab", "grabs", "grabbing", "grabbed"]),
    ("seize", ["seize", "seizes", "seizing", "seized"]),
    ("make", ["make", "makes", "making"]),
    ("build", ["build", "builds", "building", "built"]),
    ("create", ["create", "creates", "creating", "created"]),
    ("walk", ["walk", "walks", "walking", "walked"]),
    ("stroll", ["stroll", "strolls", "strolling", "strolled"]),
    ("run", ["run", "runs", "running"]),
    ("sprint", ["sprint", "sprints", "sprinting", "sprinted"]),
    ("speak", ["speak", "speaks", "speaking", "spoke"]),
    ("talk", ["talk", "talks", "talking", "talked"]),
    ("begin", ["begin", "begins", "beginning", "began"]),
    ("start", ["start", "starts", "starting", "started"]),
    ("end", ["end", "ends", "ending", "ended"]),
    ("finish", ["finish", "finishes", "finishing", "finished"]),
    ("buy", ["buy", "buys", "buying", "bought"]),
    ("purchase", ["purchase", "purchases", "purchasing", "purchased"]),
    ("sell", ["sell", "sells", "selling", "sold"]),
    ("trade", ["trade", "trades", "trading", "traded"]),
    ("look", ["look", "looks", "looking", "looked"]),
    ("watch", ["watch", "watches", "watching", "watched"]),
    ("see", ["see", "sees", "seeing", "saw"]),
    ("view", ["view", "views", "viewing", "viewed"]),
    ("help", ["help", "helps", "helping", "helped"]),
    ("assist", ["assist", "assists", "assisting", "assisted"]),
    ("ask", ["ask", "asks", "asking", "asked"]),
    ("question", ["question", "questions", "questioning", "questioned"]),
    ("answer", ["answer", "answers", "answering", "answered"]),
    ("reply", ["reply", "replies", "replying", "replied"]),
    ("open", ["open", "opens", "opening", "opened"]),
    ("close", ["close", "closes", "closing", "closed"]),
    ("shut", ["shut", "shuts", "shutting"]),
    ("pour", ["pour", "pours", "pouring", "poured"]),
    ("spill", ["spill", "spills", "spilling", "spilled"]),
    ("tour", ["tour", "tours", "touring", "toured"]),
    ("trip", ["trip", "trips", "tripped"]),
    ("camp", ["camp", "camps", "camping", "camped"]),
    ("tent", ["tent", "tents"]),
    ("bulb", ["bulb", "bulbs"]),
    ("lamp", ["lamp", "lamps"]),
    ("light", ["light", "lights", "lighting"]),
    ("house", ["house", "houses"]),
    ("home", ["home", "homes"]),
    ("street", ["street", "streets"]),
    ("road", ["road", "roads"]),
    ("path", ["path", "paths"]),
    ("car", ["car", "cars"]),
    ("auto", ["auto", "autos"]),
    ("truck", ["truck", "trucks"]),
    ("child", ["child", "children"]),
    ("kid", ["kid", "kids"]),
    ("friend", ["friend", "friends", "friendly"]),
    ("pal", ["pal", "pals"]),
    ("river", ["river", "rivers"]),
    ("stream", ["stream", "streams"]),
    ("ocean", ["ocean", "oceans"]),
    ("sea", ["sea", "seas"]),
    ("mountain", ["mountain", "mountains"]),
    ("hill", ["hill", "hills"]),
    ("forest", ["forest", "forests"]),
    ("wood", ["wood", "woods"]),
    ("happy", ["happy", "happier", "happiest"]),
    ("glad", ["glad", "gladly"]),
    ("sad", ["sad", "sadly", "sadder"]),
    ("unhappy", ["unhappy"]),
    ("big", ["big", "bigger", "biggest"]),
    ("large", ["large", "larger", "largest"]),
    ("small", ["small", "smaller", "smallest"]),
    ("little", ["little", "littler"]),
    ("fast", ["fast", "faster", "fastest"]),
    ("quick", ["quick", "quicker", "quickly"]),
    ("slow", ["slow", "slower", "slowly"]),
    ("late", ["late", "later", "lately"]),
    ("strong", ["strong", "stronger", "strongly"]),
    ("tough", ["tough", "tougher"]),
    ("weak", ["weak", "weaker", "weakly"]),
    ("faint", ["faint", "fainter"]),
    ("bright", ["bright", "brighter", "brightly"]),
    ("shiny", ["shiny", "shinier"]),
    ("dark", ["dark", "darker", "darkly"]),
    ("dim", ["dim", "dimmer", "dimly"]),
    ("cold", ["cold", "colder", "coldest"]),
    ("chilly", ["chilly", "chillier"]),
    ("warm", ["warm", "warmer", "warmly"]),
    ("hot", ["hot", "hotter", "hottest"]),
    ("clean", ["clean", "cleans", "cleaner", "cleaned"]),
    ("wash", ["wash", "washes", "washing", "washed"]),
    ("carry", ["carry", "carries", "carrying", "carried"]),
    ("haul", ["haul", "hauls", "hauling", "hauled"]),
    ("throw", ["throw", "throws", "throwing", "threw"]),
    ("toss", ["toss", "tosses", "tossing", "tossed"]),
    ("catch", ["catch", "catches", "catching", "caught"]),
    ("snag", ["snag", "snags", "snagging", "snagged"]),
    ("write", ["write", "writes", "writing", "wrote"]),
    ("record", ["record", "records", "recording", "recorded"]),
    ("read", ["read", "reads", "reading"]),
    ("study", ["study", "studies", "studying", "studied"]),
    ("learn", ["learn", "learns", "learning", "learned"]),
    ("teach", ["teach", "teaches", "teaching", "taught"]),
    ("show", ["show", "shows", "showing", "showed"]),
    ("display", ["display", "displays", "displaying", "displayed"]),
    ("find", ["find", "finds", "finding", "found"]),
    ("locate", ["locate", "locates", "locating", "located"]),
    ("lose", ["lose", "loses", "losing", "lost"]),
    ("misplace", ["misplace", "misplaces", "misplaced"]),
    ("keep", ["keep", "keeps", "keeping", "kept"]),
    ("hold", ["hold", "holds", "holding", "held"]),
    ("give", ["give", "gives", "giving", "gave"]),
    ("donate", ["donate", "donates", "donating", "donated"]),
    ("send", ["send", "sends", "sending", "sent"]),
    ("mail", ["mail", "mails", "mailing", "mailed"]),
    ("water", ["water", "waters", "watery"]),
    ("liquid", ["liquid", "liquids"]),
    ("stone", ["stone", "stones", "stony"]),
    ("rock", ["rock", "rocks", "rocky"]),
    ("paper", ["paper", "papers"]),
    ("page", ["page", "pages"]),
    ("story", ["story", "stories"]),
    ("tale", ["tale", "tales"]),
    ("song", ["song", "songs"]),
    ("tune", ["tune", "tunes"]),
    ("dance", ["dance", "dances", "dancing", "danced"]),
    ("sway", ["sway", "sways", "swaying", "swayed"]),
    ("garden", ["garden", "gardens", "gardening"]),
    ("yard", ["yard", "yards"]),
    ("window", ["window", "windows"]),
    ("pane", ["pane", "panes"]),
    ("door", ["door", "doors"]),
    ("gate", ["gate", "gates"]),
    ("table", ["table", "tables"]),
    ("desk", ["desk", "desks"]),
    ("chair", ["chair", "chairs"]),
    ("seat", ["seat", "seats", "seated"]),
    ("bread", ["bread", "breads"]),
    ("loaf", ["loaf", "loaves"]),
    ("milk", ["milk", "milky"]),
    ("cream", ["cream", "creamy"]),
    ("apple", ["apple", "apples"]),
    ("fruit", ["fruit", "fruits", "fruity"]),
    ("answerless", ["answerless"]),
    ("morning", ["morning", "mornings"]),
    ("dawn", ["dawn", "dawns"]),
    ("evening", ["evening", "evenings"]),
    ("dusk", ["dusk", "dusks"]),
    ("night", ["night", "nights", "nightly"]),
    ("winter", ["winter", "winters", "wintry"]),
    ("summer", ["summer", "summers", "summery"]),
    ("spring", ["spring", "springs"]),
    ("autumn", ["autumn", "autumns"]),
    ("fall", ["fall", "falls", "falling", "fell"]),
    ("drop", ["drop", "drops", "dropping", "dropped"]),
    ("rise", ["rise", "rises", "rising", "rose"]),
    ("climb", ["climb", "climbs", "climbing", "climbed"]),
    ("jump", ["jump", "jumps", "jumping", "jumped"]),
    ("leap", ["leap", "leaps", "leaping", "leaped"]),
    ("swim", ["swim", "swims", "swimming", "swam"]),
    ("float", ["float", "floats", "floating", "floated"]),
    ("fly", ["fly", "flies", "flying", "flew"]),
    ("soar", ["soar", "soars", "soaring", "soared"]),
    ("bird", ["bird", "birds"]),
    ("fowl", ["fowl", "fowls"]),
    ("horse", ["horse", "horses"]),
    ("pony", ["pony", "ponies"]),
    ("doctor", ["doctor", "doctors"]),
    ("physician", ["physician", "physicians"]),
    ("teacher", ["teacher", "teachers"]),
    ("tutor", ["tutor", "tutors"]),
    ("farmer", ["farmer", "farmers"]),
    ("grower", ["grower", "growers"]),
    ("market", ["market", "markets"]),
    ("store", ["store", "stores", "storing", "stored"]),
    ("money", ["money", "moneys"]),
    ("cash", ["cash"]),
    ("letter", ["letter", "letters"]),
    ("note", ["note", "notes", "noted"]),
    ("picture", ["picture", "pictures", "pictured"]),
    ("image", ["image", "images"]),
    ("sound", ["sound", "sounds", "sounded"]),
    ("noise", ["noise", "noises", "noisy"]),
    ("silence", ["silence", "silences", "silent"]),
    ("quiet", ["quiet", "quieter", "quietly"]),
]

SYNONYM_LINKS = [
    ("take", "grab"), ("take", "seize"), ("grab", "seize"),
    ("make", "build"), ("make", "create"), ("build", "create"),
    ("walk", "stroll"), ("run", "sprint"), ("speak", "talk"),
    ("begin", "start"), ("end", "finish"), ("buy", "purchase"),
    ("sell", "trade"), ("look", "watch"), ("see", "view"),
    ("help", "assist"), ("ask", "question"), ("answer", "reply"),
    ("close", "shut"), ("pour", "spill"), ("tour", "trip"),
    ("camp", "tent"), ("bulb", "lamp"), ("lamp", "light"),
    ("house", "home"), ("street", "road"), ("road", "path"),
    ("car", "auto"), ("car", "truck"), ("child", "kid"),
    ("friend", "pal"), ("river", "stream"), ("ocean", "sea"),
    ("mountain", "hill"), ("forest", "wood"), ("happy", "glad"),
    ("sad", "unhappy"), ("big", "large"), ("small", "little"),
    ("fast", "quick"), ("slow", "late"), ("strong", "tough"),
    ("weak", "faint"), ("bright", "shiny"), ("dark", "dim"),
    ("cold", "chilly"), ("warm", "hot"), ("clean", "wash"),
    ("carry", "haul"), ("throw", "toss"), ("catch", "snag"),
    ("write", "record"), ("read", "study"), ("learn", "teach"),
    ("show", "display"), ("find", "locate"), ("lose", "misplace"),
    ("keep", "hold"), ("give", "donate"), ("send", "mail"),
    ("water", "liquid"), ("stone", "rock"), ("paper", "page"),
    ("story", "tale"), ("song", "tune"), ("dance", "sway"),
    ("garden", "yard"), ("window", "pane"), ("door", "gate"),
    ("table", "desk"), ("chair", "seat"), ("bread", "loaf"),
    ("milk", "cream"), ("apple", "fruit"), ("morning", "dawn"),
    ("evening", "dusk"), ("night", "dusk"), ("winter", "summer"),
    ("spring", "autumn"), ("autumn", "fall"), ("fall", "drop"),
    ("rise", "climb"), ("jump", "leap"), ("swim", "float"),
    ("fly", "soar"), ("bird", "fowl"), ("horse", "pony"),
    ("doctor", "physician"), ("teacher", "tutor"), ("farmer", "grower"),
    ("market", "store"), ("money", "cash"), ("letter", "note"),
    ("picture", "image"), ("sound", "noise"), ("silence", "quiet"),
]


def build_lexicon() -> list[str]:
    forms = {lemma: fs for lemma, fs in FAMILIES}
    links: dict[str, set[str]] = {lemma: set() for lemma, _ in FAMILIES}
    for a, b in SYNONYM_LINKS:
        links[a].add(b)
        links[b].add(a)
    lines = []
    for lemma, fs in FAMILIES:
        for i, word in enumerate(fs):
            syns = []
            for other in sorted(links[lemma]):
                other_forms = forms[other]
                syns.append(other_forms[i] if i < len(other_forms) else other_forms[0])
            lines.append(f"{word}\t{lemma}\t{','.join(syns)}")
    return lines


def build_corpus(n_sentences: int, seed: int) -> list[str]:
    rng = Rng(seed)
    content = [w for _, fs in FAMILIES for w in fs]
    vocab = FUNCTION_WORDS + content
    # Zipf-style weights over a shuffled rank assignment
    order = list(range(len(vocab)))
    rng.shuffle(order)
    weights = [0.0] * len(vocab)
    for rank, idx in enumerate(order):
        weights[idx] = 1.0 / (rank + 2.7)
    total = sum(weights)
    cumulative = []
    acc = 0.0
    for w in weights:
        acc += w / total
        cumulative.append(acc)

    def draw() -> str:
        x = rng.next_float()
        lo, hi = 0, len(cumulative) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cumulative[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        return vocab[lo]

    sentences = []
    for _ in range(n_sentences):
        n = 4 + rng.randint(10)
        words = [draw() for _ in range(n)]
        if rng.next_float() < 0.25 and n > 5:
            words[rng.randint(n - 2) + 1] += ","
        line = " ".join(words)
        line = line[0].upper() + line[1:]
        line += "." if rng.next_float() < 0.85 else "?"
        sentences.append(line)
    return sentences


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "src" / "blockpool" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = build_corpus(10000, seed=20240817)
    (out_dir / "sample_en.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")
    lexicon = build_lexicon()
    (out_dir / "lexicon_en.tsv").write_text("\n".join(lexicon) + "\n", encoding="utf-8")
    print(f"wrote {len(corpus)} sentences and {len(lexicon)} lexicon entries to {out_dir}")


if __name__ == "__main__":
    main()
