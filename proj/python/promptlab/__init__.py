# Copyright 2026 The promptlab Authors.
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

"""Prompt pre-sampling workbench: Python bindings over the C++ core."""

import json as _json

from ._core import (
    BackendError,
    Error,
    InputError,
    NumericalError,
    ParseError,
    adjusted_win_rate,
    binomial_test,
    build_nl_pair,
    build_tag_pair,
    elo_difference,
    frechet_distance,
    length_caps,
    mcnemar_test,
    normalize_prompt,
    normalize_tag,
    parse_tags,
    results_text,
    special_tokens,
    split_sentences,
    summarize,
    vendi_score,
)
from . import _core

__version__ = "0.1.0"


def parse_prompt(text):
    """Returns {"meta": [{"key", "content"}], "tags": [...], "nl": [...]}."""
    return _json.loads(_core.parse_prompt_json(text))


def forge_sample(record, task, length, seed):
    """Builds one training sample from a caption record (dict or JSON text)."""
    if not isinstance(record, str):
        record = _json.dumps(record)
    return _json.loads(_core.forge_sample_json(record, task, length, seed))


def run_cycle(prompt, length="long", seed=0, mode="two_step"):
    """Runs one refinement cycle against the built-in mock backend."""
    return _json.loads(_core.run_cycle_json(prompt, length, seed, mode))


def results(votes_jsonl, metric=None, base=1000.0):
    """Decoded form of results_text."""
    return _json.loads(results_text(votes_jsonl, metric, base))
