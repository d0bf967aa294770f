/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <cstdint>
#include <vector>

#include "khaos/domain.hpp"
#include "khaos/pipeline_sim.hpp"

namespace khaos::testing {

inline WorkloadTrace constant_trace(int64_t rate, int64_t duration, int64_t start = 0) {
  return WorkloadTrace{start, std::vector<int64_t>(static_cast<size_t>(duration), rate)};
}

/// Spec with d = detection + restart = 60 s and capacity 2000 events/s.
inline sim::PipelineSpec reference_spec() {
  sim::PipelineSpec spec;
  spec.capacity_mu = 2000.0;
  spec.detection_timeout = 50.0;
  spec.restart_duration = 10.0;
  return spec;
}

inline double relative_error(double measured, double expected) {
  return expected == 0.0 ? measured : (measured - expected) / expected;
}

}  // namespace khaos::testing
