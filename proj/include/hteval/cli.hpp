/*
 * Copyright 2026 The hteval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <ostream>
#include <span>
#include <string>

namespace hteval {

/// Runs one `hteval` invocation. `args` excludes the program name.
/// Diagnostics go to `diagnostics`; data artifacts only to files.
/// Returns the process exit code.
int run_cli(std::span<const std::string> args, std::ostream& diagnostics);

}  // namespace hteval
