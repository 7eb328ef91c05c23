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

#include <cstdint>
#include <span>
#include <vector>

#include "attnscope/ad/graph.hpp"

namespace attnscope::ad::detail {

// Float buffer recycled through a small per-thread pool. Conv layers rebuild
// the same large im2col matrices for every sample; reusing the storage avoids
// fresh page faults and zero fills on each graph. Contents are unspecified
// after resize().
class ScratchBuffer {
 public:
  ScratchBuffer() = default;
  ~ScratchBuffer();
  ScratchBuffer(ScratchBuffer&&) noexcept = default;
  ScratchBuffer& operator=(ScratchBuffer&& other) noexcept;
  ScratchBuffer(const ScratchBuffer&) = delete;
  ScratchBuffer& operator=(const ScratchBuffer&) = delete;

  void resize(std::size_t n);
  float* data() { return storage_.data(); }
  const float* data() const { return storage_.data(); }
  std::size_t size() const { return storage_.size(); }

 private:
  void release();
  std::vector<float> storage_;
};

// Values saved by the forward pass for the backward pass.
struct OpCache {
  ScratchBuffer columns;               // conv: im2col matrix [K, positions]
  std::vector<std::uint32_t> argmax;   // maxpool: flat input index per output
  std::vector<float> mean;             // layer norm
  std::vector<float> rstd;
};

Tensor evaluate(OpKind kind, std::span<const Tensor* const> inputs,
                const OpAttrs& attrs, OpCache& cache);

// Adds the contribution of `grad_out` into each non-null grad_in[i].
void differentiate(OpKind kind, std::span<const Tensor* const> inputs,
                   const Tensor& output, const Tensor& grad_out,
                   const OpAttrs& attrs, const OpCache& cache,
                   std::span<Tensor* const> grad_in);

}  // namespace attnscope::ad::detail
