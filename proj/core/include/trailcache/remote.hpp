/* Copyright 2026 The trailcache Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "trailcache/teacher.hpp"

namespace trailcache {

// HTTP/JSON client for a reasoning backend served elsewhere.
//   POST /v1/next_step       {context, prefix, seed} -> {embedding}
//   POST /v1/generate_chain  {context, seed}         -> {steps, tokens}
// Transport failures raise BackendFailure.
class RemoteBackend : public ReasoningBackend {
 public:
  RemoteBackend(std::string host, int port, double timeout_s = 10.0);
  ~RemoteBackend() override;

  LatentStep next_step(const SimulationContext& ctx,
                       std::span<const LatentStep> prefix,
                       std::uint64_t seed) const override;
  GeneratedChain generate_chain(const SimulationContext& ctx,
                                std::uint64_t seed) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves any backend over the protocol above on a background thread.
class BackendServer {
 public:
  explicit BackendServer(const ReasoningBackend& backend);
  ~BackendServer();

  // Binds and starts listening. Port 0 picks a free port, which is returned.
  int start(const std::string& host, int port);
  // Blocks the calling thread until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trailcache
