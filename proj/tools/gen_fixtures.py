#!/usr/bin/env python3
# Copyright 2026 The Funnel Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled scenes and scenario scripts under fixtures/."""

import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

FACES = [
    (4, 5, 6, 7),  # +Z
    (1, 0, 3, 2),  # -Z
    (5, 1, 2, 6),  # +X
    (0, 4, 7, 3),  # -X
    (7, 6, 2, 3),  # +Y
    (0, 1, 5, 4),  # -Y
]


def r(v):
    return round(v, 4)


def box(center, half):
    cx, cy, cz = center
    hx, hy, hz = half
    c = [
        (cx - hx, cy - hy, cz - hz), (cx + hx, cy - hy, cz - hz),
        (cx + hx, cy + hy, cz - hz), (cx - hx, cy + hy, cz - hz),
        (cx - hx, cy - hy, cz + hz), (cx + hx, cy - hy, cz + hz),
        (cx + hx, cy + hy, cz + hz), (cx - hx, cy + hy, cz + hz),
    ]
    tris = []
    for a, b, cc, d in FACES:
        tris.append([c[a], c[b], c[cc]])
        tris.append([c[a], c[cc], c[d]])
    return [[[r(x) for x in v] for v in t] for t in tris]


def obj(oid, name, color, selectable, *boxes):
    tris = []
    for center, half in boxes:
        tris.extend(box(center, half))
    return {"id": oid, "name": name, "color": list(color),
            "selectable": selectable, "triangles": tris}


def room_shell(width, depth, height, floor_color, wall_color):
    hw, hd = width / 2, depth / 2
    t = 0.05
    return [
        obj("floor", "Floor", floor_color, False,
            ((0, -t, 0), (hw, t, hd))),
        obj("wall_north", "North wall", wall_color, False,
            ((0, height / 2, -hd - t), (hw, height / 2, t))),
        obj("wall_south", "South wall", wall_color, False,
            ((0, height / 2, hd + t), (hw, height / 2, t))),
        obj("wall_east", "East wall", wall_color, False,
            ((hw + t, height / 2, 0), (t, height / 2, hd))),
        obj("wall_west", "West wall", wall_color, False,
            ((-hw - t, height / 2, 0), (t, height / 2, hd))),
    ]


def escape_room():
    objects = room_shell(10.0, 10.0, 3.0, (120, 100, 80), (170, 160, 150))
    objects += [
        obj("door", "Exit door", (110, 70, 40), True, ((0, 1.05, -4.95), (0.5, 1.05, 0.05))),
        obj("cauldron", "Cauldron", (60, 60, 70), True,
            ((0, 0.35, -2.0), (0.45, 0.35, 0.45))),
        obj("table", "Potion table", (140, 90, 50), False,
            ((2.5, 0.4, -2.5), (0.8, 0.4, 0.5))),
        obj("wand", "Wand", (230, 230, 240), True, ((2.2, 0.83, -2.4), (0.2, 0.02, 0.02))),
        obj("ingredient_red", "Red ingredient", (200, 40, 40), True,
            ((2.6, 0.9, -2.6), (0.08, 0.1, 0.08))),
        obj("ingredient_green", "Green ingredient", (40, 180, 60), True,
            ((2.9, 0.9, -2.6), (0.08, 0.1, 0.08))),
        obj("ingredient_blue", "Blue ingredient", (40, 80, 200), True,
            ((2.75, 0.9, -2.3), (0.08, 0.1, 0.08))),
        obj("instructions", "Instruction sheet", (245, 240, 220), True,
            ((-1.5, 0.75, 3.0), (0.3, 0.02, 0.2)), ((-1.5, 0.36, 3.0), (0.05, 0.36, 0.05))),
        obj("bookshelf", "Bookshelf", (100, 60, 30), True,
            ((-4.6, 1.0, -1.0), (0.3, 1.0, 1.2))),
        obj("clock", "Wall clock", (250, 250, 250), True, ((4.93, 2.1, 1.0), (0.02, 0.25, 0.25))),
        obj("fire_extinguisher", "Fire extinguisher", (210, 20, 20), True,
            ((4.7, 0.35, 3.5), (0.1, 0.35, 0.1))),
    ]
    spawn = {"pos": [0.0, 0.0, 3.0], "quat": [1.0, 0.0, 0.0, 0.0]}
    return {"spawn": spawn, "objects": objects}


def medical_room():
    objects = room_shell(8.0, 8.0, 3.0, (200, 205, 210), (235, 240, 240))
    objects += [
        obj("bed", "Examination bed", (90, 130, 160), False,
            ((0, 0.4, -1.5), (1.0, 0.4, 0.45))),
        obj("patient", "Training mannequin", (220, 190, 170), True,
            ((0, 0.95, -1.5), (0.8, 0.15, 0.25))),
        obj("bp_cuff", "Blood pressure cuff", (30, 30, 120), True,
            ((0.45, 1.12, -1.3), (0.12, 0.04, 0.08))),
        obj("ecg_electrodes", "ECG electrodes", (250, 250, 120), True,
            ((-0.2, 1.12, -1.55), (0.15, 0.02, 0.1))),
        obj("ecg_monitor", "ECG monitor", (40, 40, 40), True,
            ((1.6, 1.3, -1.9), (0.3, 0.25, 0.1)), ((1.6, 0.55, -1.9), (0.05, 0.55, 0.05))),
        obj("cabinet", "Supply cabinet", (180, 180, 190), True,
            ((-3.6, 1.0, -2.0), (0.35, 1.0, 0.8))),
        obj("sink", "Sink", (200, 200, 210), False, ((3.6, 0.85, 2.0), (0.35, 0.1, 0.3))),
        obj("chair", "Chair", (60, 100, 60), True, ((-1.5, 0.25, 1.0), (0.25, 0.25, 0.25))),
        obj("clipboard", "Clipboard", (150, 110, 70), True,
            ((-1.5, 0.52, 1.0), (0.15, 0.01, 0.2))),
        obj("fire_extinguisher", "Fire extinguisher", (210, 20, 20), True,
            ((3.7, 0.35, -3.5), (0.1, 0.35, 0.1))),
        obj("fire_alarm", "Fire alarm", (230, 30, 30), True,
            ((3.95, 1.8, -3.0), (0.03, 0.1, 0.1))),
    ]
    spawn = {"pos": [0.0, 0.0, 1.5], "quat": [1.0, 0.0, 0.0, 0.0]}
    return {"spawn": spawn, "objects": objects}


def yaw_quat(yaw, pitch=0.0):
    # yaw about +Y, then pitch about local X
    qy = (math.cos(yaw / 2), 0.0, math.sin(yaw / 2), 0.0)
    qp = (math.cos(pitch / 2), math.sin(pitch / 2), 0.0, 0.0)
    w1, x1, y1, z1 = qy
    w2, x2, y2, z2 = qp
    q = (w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
         w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
         w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
         w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2)
    return [r(c) for c in q]


def rotate_y(v, yaw):
    x, y, z = v
    c, s = math.cos(yaw), math.sin(yaw)
    return (c * x + s * z, y, -s * x + c * z)


def avatar(t, x, z, yaw, pitch=0.0, reach=0.0):
    head = {"pos": [r(x), 1.6, r(z)], "quat": yaw_quat(yaw, pitch)}
    lh = rotate_y((-0.25, -0.6, -0.3), yaw)
    rh = rotate_y((0.25, -0.6 + 0.3 * reach, -0.3 - 0.3 * reach), yaw)
    return {"t": r(t), "type": "set_avatar", "head": head,
            "left_hand": {"pos": [r(x + lh[0]), r(1.6 + lh[1]), r(z + lh[2])],
                          "quat": yaw_quat(yaw)},
            "right_hand": {"pos": [r(x + rh[0]), r(1.6 + rh[1]), r(z + rh[2])],
                           "quat": yaw_quat(yaw)}}


def walk(events, t0, path, step=1.0):
    """path: list of (x, z, yaw, pitch) keyframes spaced `step` seconds apart."""
    t = t0
    for x, z, yaw, pitch in path:
        events.append(avatar(t, x, z, yaw, pitch))
        t += step
    return t


# The free camera starts 1.5 m behind the spawn point, 1.7 m up.
def free_camera_start(spawn):
    return (spawn[0], 1.7, spawn[1] + 1.5)


def task_a():
    ev = []
    spawn = (0.0, 3.0)
    t = walk(ev, 0.0, [(0, 3.0, 0, 0), (0, 3.0, 0.4, -0.2), (-0.8, 3.2, 1.2, -0.4),
                       (-1.3, 3.2, 1.4, -0.6), (-1.3, 3.2, 1.4, -0.6)], 1.5)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "instructions"})
    ev.append({"t": r(t + 0.2), "type": "speak",
               "text": "The sheet says mix three ingredients in the cauldron", "duration": 3.0})
    t = walk(ev, t + 1.0, [(-1.0, 2.5, 0.6, 0), (0.0, 1.0, 0.0, 0), (0.8, -0.5, -0.6, 0),
                           (1.8, -1.5, -0.8, -0.3), (2.2, -1.7, -0.2, -0.6)], 1.5)
    for name in ["wand", "ingredient_red", "ingredient_green", "ingredient_blue"]:
        ev.append({"t": r(t), "type": "touch_object", "object_id": name})
        t += 1.5
    ev.append({"t": r(t), "type": "speak", "text": "Now to the cauldron", "duration": 2.0})
    t = walk(ev, t + 0.5, [(1.2, -1.2, 0.8, 0), (0.4, -1.0, 0.2, -0.5),
                           (0.2, -1.0, 0.1, -0.7)], 1.5)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "cauldron"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "The potion is ready", "duration": 2.0})
    t += 2.0
    # Walk back to the main camera, grab it and point it at the door.
    cam = free_camera_start(spawn)
    t = walk(ev, t, [(0.3, 0.5, math.pi, 0), (0.0, 2.5, math.pi, 0)], 2.0)
    reach_x, reach_z = cam[0] - 0.25, cam[2] - 0.6
    ev.append(avatar(t, reach_x, reach_z, math.pi, 0, reach=0.0))
    ev.append({"t": r(t + 0.3), "type": "grab_main_camera", "hand": "right"})
    # The right hand sits at the camera position when grabbing.
    hand = {"pos": [r(cam[0]), r(cam[1]), r(cam[2])], "quat": yaw_quat(math.pi)}
    ev.append({"t": r(t + 0.2), "type": "set_avatar",
               "head": {"pos": [r(reach_x), 1.6, r(reach_z)], "quat": yaw_quat(math.pi)},
               "left_hand": {"pos": [r(reach_x - 0.2), 1.0, r(reach_z + 0.2)],
                             "quat": yaw_quat(math.pi)},
               "right_hand": hand})
    # keep events sorted: move the set_avatar before the grab
    ev[-1], ev[-2] = ev[-2], ev[-1]
    tt = t + 0.5
    for k in range(1, 5):
        ang = math.pi + k * 0.15
        ev.append({"t": r(tt), "type": "move_grabbed_camera",
                   "hand": {"pos": [r(cam[0] + 0.1 * k), r(cam[1] + 0.05 * k), r(cam[2] - 0.1 * k)],
                            "quat": yaw_quat(ang)}})
        tt += 0.5
    ev.append({"t": r(tt), "type": "release_main_camera"})
    t = walk(ev, tt + 0.5, [(0.0, 1.0, 0, 0), (0.0, -1.5, 0, 0), (0.0, -3.5, 0, 0),
                            (0.0, -4.2, 0, -0.1)], 2.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "door"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "We made it out", "duration": 2.0})
    t = walk(ev, t + 1.0, [(0.0, -4.2, 0.8, 0), (0.0, -4.2, -0.8, 0), (0.0, -4.2, 0, 0),
                           (-0.5, -3.0, 2.0, 0), (-2.0, -1.0, 2.5, 0), (-3.0, 1.0, 2.8, 0),
                           (-2.0, 2.5, -2.5, 0), (0.0, 3.0, 0, 0)], 3.0)
    return ev


def task_b():
    ev = []
    t = walk(ev, 0.0, [(0, 1.5, 0, 0), (0.0, 0.0, 0, -0.3), (0.2, -0.6, 0, -0.6)], 2.0)
    ev.append({"t": r(t), "type": "speak",
               "text": "Today we take a blood pressure reading", "duration": 4.0})
    t = walk(ev, t + 1.0, [(0.4, -0.7, -0.2, -0.7), (0.45, -0.75, -0.1, -0.8)], 2.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "bp_cuff"})
    ev.append({"t": r(t + 1.0), "type": "speak", "text": "Wrap the cuff above the elbow",
               "duration": 3.0})
    t = walk(ev, t + 3.0, [(0.1, -0.8, 0.3, -0.8), (-0.2, -0.8, 0.2, -0.8)], 3.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "ecg_electrodes"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "Electrodes go on the chest",
               "duration": 3.0})
    t = walk(ev, t + 2.0, [(0.8, -0.9, -0.6, -0.2), (1.2, -1.0, -0.6, 0.0)], 3.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "ecg_monitor"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "Read the rhythm here", "duration": 3.0})
    t = walk(ev, t + 2.0, [(0.0, 0.0, 1.2, 0), (-1.2, 0.6, 2.5, 0), (-1.4, 0.5, 3.0, -0.5)], 3.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "clipboard"})
    t = walk(ev, t + 1.0, [(-1.0, -1.0, 1.6, 0), (-2.8, -2.0, 1.57, 0)], 3.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "cabinet"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "Supplies are kept in here",
               "duration": 2.0})
    t = walk(ev, t + 2.0, [(-1.0, 0.0, -0.5, 0), (0.5, 0.5, -0.2, 0), (2.5, -2.5, -0.8, 0),
                           (3.3, -3.0, -1.4, 0.3)], 4.0)
    ev.append({"t": r(t), "type": "touch_object", "object_id": "fire_alarm"})
    ev.append({"t": r(t + 0.5), "type": "speak", "text": "In a fire, pull this alarm first",
               "duration": 3.0})
    walk(ev, t + 2.0, [(3.2, -3.2, -2.2, -0.5), (1.5, -1.0, 0.5, 0), (0, 1.5, 0, 0)], 4.0)
    return ev


def write_jsonl(path, events):
    events = sorted(events, key=lambda e: e["t"])  # stable
    with open(path, "w") as f:
        for e in events:
            f.write(json.dumps(e, separators=(",", ":")) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    for name, scene in [("escape_room", escape_room()), ("medical_room", medical_room())]:
        with open(OUT / f"{name}.scene.json", "w") as f:
            json.dump(scene, f, separators=(",", ":"))
            f.write("\n")
    write_jsonl(OUT / "task_a.scenario.jsonl", task_a())
    write_jsonl(OUT / "task_b.scenario.jsonl", task_b())


if __name__ == "__main__":
    main()
