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

"""Independent line-splitting oracle for criteo_1000.tsv.

Prints the histogram of present (non-empty) feature columns per line, the
label count, and the number of lines with a negative integer column.
"""
import collections
import sys

path = sys.argv[1] if len(sys.argv) > 1 else "criteo_1000.tsv"
hist = collections.Counter()
positives = negatives = 0
with open(path) as f:
    for line in f:
        cols = line.rstrip("\n").split("\t")
        assert len(cols) == 40
        positives += cols[0] == "1"
        hist[sum(1 for c in cols[1:] if c)] += 1
        negatives += any(c.startswith("-") for c in cols[1:14])
print("positives", positives)
print("negative_lines", negatives)
for k in sorted(hist):
    print(k, hist[k])
