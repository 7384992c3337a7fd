#!/usr/bin/env python3
# Copyright 2026 The turbovaed Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Runs every turbovaed subcommand with --json and validates the output
against the schemas in docs/schemas.

usage: check_cli_schemas.py BIN_DIR SCHEMA_DIR
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

SMALL = ["--factors", "4,8,8", "--width-divisor", "8", "--norm-groups", "4"]


def main() -> int:
    bin_dir, schema_dir = map(pathlib.Path, sys.argv[1:3])
    cli, gen = str(bin_dir / "turbovaed"), str(bin_dir / "turbovaed-gen")
    schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    failures = 0

    with tempfile.TemporaryDirectory() as tmp:
        t = pathlib.Path(tmp)
        w, lat, vid, rgb = t / "w.tvwd", t / "l.tvt", t / "v.tvt", t / "v.rgb"
        subprocess.run([gen, "weights", *SMALL, "--out", w], check=True, capture_output=True)
        subprocess.run([gen, "latent", *SMALL, "--frames", "5", "--height", "16", "--width", "16", "--out", lat],
                       check=True, capture_output=True)

        runs = [
            ("decode", ["decode", *SMALL, "--weights", w, "--latent", lat, "--out", vid, "--raw-rgb", rgb]),
            ("decoder_profile", ["bench", *SMALL, "--frames", "5", "--height", "16", "--width", "16",
                                 "--warmup", "1", "--repeats", "3"]),
            ("upsampler_bench", ["bench-ops", "--shape", "1,64,2,4,4", "--factors", "2,2",
                                 "--warmup", "1", "--repeats", "3"]),
            ("verify", ["verify", "--suite", "dwsep"]),
            ("params", ["params", *SMALL]),
            ("params", ["params", *SMALL, "--per-param"]),
            ("sweep", ["sweep", *SMALL, "--upto", "up_1"]),
            ("distill_toy", ["distill-toy", "--steps", "2", "--eval-every", "1", "--teacher-steps", "1",
                             "--train-videos", "2"]),
            ("distill_toy_paired", ["distill-toy", "--paired", "--steps", "3", "--tau-step", "2",
                                    "--teacher-steps", "1", "--train-videos", "2"]),
            ("metrics", ["metrics", "--ref", vid, "--test", vid]),
            ("metrics", ["metrics", "--ref", vid, "--test", vid, "--per-frame"]),
            ("inspect", ["inspect", w]),
        ]
        for schema, args in runs:
            proc = subprocess.run([cli, *map(str, args), "--json"], capture_output=True, text=True)
            label = " ".join(map(str, args[:1])) + f" -> {schema}"
            try:
                if proc.returncode != 0:
                    raise RuntimeError(f"exit {proc.returncode}: {proc.stderr.strip()}")
                jsonschema.validate(json.loads(proc.stdout), schemas[schema])
                print(f"PASS {label}")
            except Exception as e:  # noqa: BLE001
                failures += 1
                print(f"FAIL {label}: {e}")

        try:
            jsonschema.validate(json.loads((t / "v.rgb.json").read_text()), schemas["raw_rgb_sidecar"])
            print("PASS raw rgb sidecar -> raw_rgb_sidecar")
        except Exception as e:  # noqa: BLE001
            failures += 1
            print(f"FAIL raw rgb sidecar: {e}")

    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
