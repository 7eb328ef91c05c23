// Copyright 2026 The attnscope Authors.
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

#pragma once

namespace attnscope::util {

// Asks the C allocator to keep freed memory instead of returning it to the
// OS. Every training sample builds and drops a graph of the same tensor
// sizes; without this, glibc trims and re-faults tens of megabytes per
// sample. Idempotent; a no-op on other C libraries.
void retain_freed_memory();

}  // namespace attnscope::util
