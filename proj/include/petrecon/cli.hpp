// Copyright 2026 The petrecon Authors. All Rights Reserved.
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


#ifndef PETRECON_CLI_HPP
#define PETRECON_CLI_HPP

#include <string>
#include <vector>

namespace petrecon {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitMissingArtifact = 4,
  kExitNumeric = 5,
};

/// Canonical method names in report order.
const std::vector<std::string>& recon_methods();

/// Runs the command line (without the program name) and returns the exit
/// code. Errors are reported on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace petrecon

#endif  // PETRECON_CLI_HPP
