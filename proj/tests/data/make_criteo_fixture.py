# Copyright (c) 2026, The desrec Authors.
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

"""Writes criteo_1000.tsv: 1000 Criteo-format lines with missing and negative values."""
import random

rng = random.Random(20240611)
vocab = [[f"{rng.getrandbits(32):08x}" for _ in range(5 + 3 * j)] for j in range(26)]
with open("criteo_1000.tsv", "w", newline="\n") as out:
    for _ in range(1000):
        cols = ["1" if rng.random() < 0.26 else "0"]
        for i in range(13):
            r = rng.random()
            if r < 0.2:
                cols.append("")
            elif r < 0.25:
                cols.append(str(-rng.randint(1, 3)))
            else:
                cols.append(str(int(rng.expovariate(1.0 / (3 + 40 * i)))))
        for j in range(26):
            cols.append("" if rng.random() < 0.15 else rng.choice(vocab[j]))
        out.write("\t".join(cols) + "\n")
