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

#include "trailcache/remote.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"

namespace trailcache {

namespace {

nlohmann::json step_json(const LatentStep& s) { return s.v; }

LatentStep step_from(const nlohmann::json& j) {
  LatentStep s;
  if (!j.is_array() || j.size() != kLatentDim) {
    fail(ErrorCode::kDimensionMismatch, "embedding must have 64 entries");
  }
  for (std::size_t i = 0; i < kLatentDim; ++i) s.v[i] = j[i].get<double>();
  return s;
}

}  // namespace

struct RemoteBackend::Impl {
  std::string host;
  int port;
  double timeout_s;

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    httplib::Client cli(host, port);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) {
      fail(ErrorCode::kBackendFailure,
           path + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      fail(ErrorCode::kBackendFailure,
           path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kBackendFailure, path + ": bad response: " + e.what());
    }
  }
};

RemoteBackend::RemoteBackend(std::string host, int port, double timeout_s)
    : impl_(std::make_unique<Impl>(Impl{std::move(host), port, timeout_s})) {}

RemoteBackend::~RemoteBackend() = default;

LatentStep RemoteBackend::next_step(const SimulationContext& ctx,
                                    std::span<const LatentStep> prefix,
                                    std::uint64_t seed) const {
  nlohmann::json body;
  body["context"] = ctx;
  body["prefix"] = nlohmann::json::array();
  for (const auto& s : prefix) body["prefix"].push_back(step_json(s));
  body["seed"] = seed;
  const auto res = impl_->post("/v1/next_step", body);
  try {
    return step_from(res.at("embedding"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBackendFailure, std::string("next_step: ") + e.what());
  }
}

GeneratedChain RemoteBackend::generate_chain(const SimulationContext& ctx,
                                             std::uint64_t seed) const {
  const auto res = impl_->post("/v1/generate_chain", {{"context", ctx}, {"seed", seed}});
  GeneratedChain out;
  out.chain.context = ctx;
  try {
    for (const auto& s : res.at("steps")) {
      out.chain.steps.push_back(step_from(s));
      out.chain.provenance.push_back({StepSource::Kind::kGenerated, 0});
    }
    out.tokens.tokens = res.at("tokens").get<std::vector<TokenId>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBackendFailure, std::string("generate_chain: ") + e.what());
  }
  check_grammar(out.tokens);
  validate(out.chain);
  return out;
}

struct BackendServer::Impl {
  const ReasoningBackend& backend;
  httplib::Server server;
  std::thread thread;
};

BackendServer::BackendServer(const ReasoningBackend& backend)
    : impl_(std::make_unique<Impl>(backend)) {
  auto& srv = impl_->server;
  const ReasoningBackend& be = backend;
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(handler(body).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };
  srv.Post("/v1/next_step", guarded([&be](const nlohmann::json& body) {
             const auto ctx = body.at("context").get<SimulationContext>();
             std::vector<LatentStep> prefix;
             for (const auto& s : body.at("prefix")) prefix.push_back(step_from(s));
             const auto step = be.next_step(ctx, prefix, body.at("seed").get<std::uint64_t>());
             return nlohmann::json{{"embedding", step_json(step)}};
           }));
  srv.Post("/v1/generate_chain", guarded([&be](const nlohmann::json& body) {
             const auto ctx = body.at("context").get<SimulationContext>();
             const auto gen = be.generate_chain(ctx, body.at("seed").get<std::uint64_t>());
             nlohmann::json steps = nlohmann::json::array();
             for (const auto& s : gen.chain.steps) steps.push_back(step_json(s));
             return nlohmann::json{{"steps", steps}, {"tokens", gen.tokens.tokens}};
           }));
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorCode::kBackendFailure, "cannot bind " + host);
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void BackendServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void BackendServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace trailcache
