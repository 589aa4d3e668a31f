"""Published open-set split tables, shipped as in-package fixtures.

NTU60 and ToyotaSmartHome publish the unseen side of each of the five runs;
NTU120 publishes the seen side.  Class indices follow each dataset's own
category numbering; ToyotaSmartHome is published as class names.
"""

NTU60_NUM_CLASSES = 60
NTU120_NUM_CLASSES = 120
TOYOTA_NUM_CLASSES = 31

NTU60_UNSEEN = {
    1: (50, 40, 30, 37, 12, 48, 45, 49, 8, 29, 58, 13, 1, 39, 27, 47, 14, 52, 3, 44),
    2: (41, 21, 52, 6, 12, 36, 24, 56, 35, 57, 15, 26, 39, 53, 19, 4, 27, 25, 17, 47),
    3: (46, 10, 47, 39, 55, 14, 58, 53, 13, 40, 24, 9, 45, 23, 27, 3, 7, 54, 33, 17),
    4: (21, 55, 11, 43, 41, 3, 52, 39, 46, 59, 47, 15, 17, 54, 40, 33, 9, 38, 31, 57),
    5: (56, 14, 17, 7, 40, 52, 37, 50, 36, 6, 44, 11, 41, 9, 47, 24, 53, 2, 10, 58),
}

NTU120_SEEN = {
    1: (0, 37, 52, 70, 96, 92, 91, 4, 39, 12, 46, 81, 87, 31, 72, 48, 16, 62, 42,
        102, 112, 68, 56, 49, 22, 11, 88, 107, 93, 43),
    2: (17, 90, 47, 80, 79, 48, 27, 82, 61, 53, 96, 117, 62, 35, 23, 85, 8, 98,
        104, 77, 51, 75, 56, 105, 54, 25, 18, 44, 40, 109),
    3: (76, 9, 57, 59, 5, 51, 83, 104, 73, 27, 92, 72, 42, 111, 100, 67, 105, 4,
        101, 12, 84, 119, 15, 33, 78, 62, 82, 24, 65, 108),
    4: (48, 12, 26, 63, 20, 109, 80, 33, 79, 67, 100, 6, 24, 11, 76, 61, 10, 59,
        0, 99, 19, 4, 90, 58, 28, 88, 44, 95, 72, 18),
    5: (45, 0, 44, 13, 100, 14, 32, 72, 101, 17, 39, 63, 20, 56, 105, 71, 78, 73,
        8, 99, 19, 115, 23, 54, 12, 109, 15, 37, 88, 18),
}

TOYOTA_UNSEEN_NAMES = {
    1: ("Drink.Fromcup", "Cook.Cleandishes", "Laydown", "Enter", "Takepills",
        "Walk", "Usetablet", "Cook.Usestove", "Leave", "Eat.Snack",
        "Maketea.Boilwater", "Cook.Cut", "Pour.Frombottle", "Drink.Fromglass",
        "Uselaptop", "WatchTV", "Pour.Fromkettle", "Usetelephone"),
    2: ("Leave", "Usetelephone", "Maketea.Boilwater", "Cook.Usestove",
        "Eat.Snack", "Cook.Cleanup", "Pour.Fromkettle", "Cook.Stir", "Walk",
        "Usetablet", "Pour.Frombottle", "Drink.Fromglass", "Getup",
        "Makecoffee.Pourgrains", "Drink.Fromcup", "Takepills",
        "Makecoffee.Pourwater", "Cutbread"),
    3: ("Usetelephone", "Makecoffee.Pourwater", "Cook.Usestove",
        "Maketea.Insertteabag", "Uselaptop", "Enter", "Maketea.Boilwater",
        "Cutbread", "Pour.Frombottle", "Drink.Fromcan", "Cook.Stir", "Laydown",
        "Cook.Cleanup", "Drink.Fromcup", "Readbook", "Drink.Frombottle",
        "Leave", "Pour.Fromcan"),
    4: ("Cutbread", "Usetelephone", "Drink.Frombottle", "Walk", "Usetablet",
        "Cook.Cleanup", "Drink.Fromcan", "Drink.Fromglass", "Drink.Fromcup",
        "Pour.Fromcan", "Makecoffee.Pourgrains", "Maketea.Boilwater", "Leave",
        "Cook.Stir", "Makecoffee.Pourwater", "WatchTV", "Laydown",
        "Eat.Attable"),
    5: ("Enter", "Eat.Attable", "Pour.Frombottle", "Eat.Snack", "Cook.Cleanup",
        "Takepills", "Pour.Fromkettle", "Sitdown", "Makecoffee.Pourgrains",
        "WatchTV", "Uselaptop", "Drink.Frombottle", "Drink.Fromcan", "Cook.Cut",
        "Readbook", "Cutbread", "Maketea.Boilwater", "Maketea.Insertteabag"),
}

# The published runs jointly cover the full ontology, so the sorted union is
# the default class-name universe (callers may supply their own mapping).
TOYOTA_CLASS_NAMES = tuple(
    sorted(set(name for names in TOYOTA_UNSEEN_NAMES.values() for name in names))
)
