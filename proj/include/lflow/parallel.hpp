// Copyright 2026 The lflow Authors
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

// Index-ordered parallel map. Workers pull indices from a shared counter;
// results land in their own slot, so any reduction done afterwards in index
// order is independent of the worker count.

#ifndef LFLOW_PARALLEL_HPP
#define LFLOW_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace lflow {

// LFLOW_THREADS if set to a positive integer, else hardware concurrency.
int worker_count();
// Overrides worker_count() for this process; 0 restores the default.
void set_worker_count(int workers);

// Runs body(i) for i in [0, count). If any call throws, the exception of the
// smallest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

template <typename T, typename F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = f(i); });
  return out;
}

}  // namespace lflow

#endif  // LFLOW_PARALLEL_HPP
