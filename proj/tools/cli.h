// Copyright (c) 2026 The PVT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PVT_TOOLS_CLI_H_
#define PVT_TOOLS_CLI_H_

namespace pvt {

// Exit codes of the pvt command line.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad flags, config or inputs
inline constexpr int kExitRuntime = 2;     // I/O and numerical failures

// Entry point of `pvt <subcommand> --config PATH --out DIR [...]`. Never
// throws; errors are reported on stderr and mapped to the codes above.
int RunCli(int argc, const char* const* argv);

}  // namespace pvt

#endif  // PVT_TOOLS_CLI_H_
