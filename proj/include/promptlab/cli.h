// Copyright 2026 The promptlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTLAB_CLI_H_
#define PROMPTLAB_CLI_H_

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "promptlab/metrics.h"

namespace promptlab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInput = 3,
  kExitRuntime = 4,
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
// Reads the process environment.
std::optional<std::string> process_env(const char* name);

// Runs one invocation. `args` excludes the program name. Settings resolve as
// flags, then PROMPTLAB_* environment variables, then the --config file,
// then built-in defaults.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err, const EnvLookup& env = process_env);

enum class Select { kTop, kBottom };

// The ceil(fraction * n) highest (or lowest) scoring ids, best first. Equal
// scores keep input order. Throws InputError on empty input or a fraction
// outside (0, 1].
std::vector<std::string> decile_filter(std::span<const metrics::ScoredItem> items,
                                       Select which, double fraction);

// Up to 10 significant digits, always with a decimal point: 2 -> "2.0".
std::string format_number(double v);

}  // namespace promptlab::cli

#endif  // PROMPTLAB_CLI_H_
