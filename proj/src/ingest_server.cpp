#include <chrono>
#include <thread>

#include "httplib.h"
#include "tiersim/errors.hpp"
#include "tiersim/station.hpp"

namespace tiersim {

struct IngestServer::Impl {
  Ingestor& ingestor;
  std::string host;
  httplib::Server server;
  std::thread thread;
  bool bound = false;

  Impl(Ingestor& in, std::string h) : ingestor(in), host(std::move(h)) {
    server.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
      std::string body;
      for (Ack ack : ingestor.handle_body(req.body)) {
        body.append(to_string(ack));
        body.push_back('\n');
      }
      res.set_content(body, "text/plain");
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("OK\n", "text/plain"); });
  }
};

IngestServer::IngestServer(Ingestor& ingestor, std::string host, int port)
    : impl_(std::make_unique<Impl>(ingestor, std::move(host))), port_(port) {}

IngestServer::~IngestServer() { stop(); }

namespace {

int bind_server(httplib::Server& server, const std::string& host, int port) {
  if (port == 0) return server.bind_to_any_port(host);
  return server.bind_to_port(host, port) ? port : -1;
}

}  // namespace

int IngestServer::start() {
  const int bound = bind_server(impl_->server, impl_->host, port_);
  if (bound < 0) throw IoError("cannot bind " + impl_->host + ":" + std::to_string(port_));
  port_ = bound;
  impl_->bound = true;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void IngestServer::run() {
  const int bound = bind_server(impl_->server, impl_->host, port_);
  if (bound < 0) throw IoError("cannot bind " + impl_->host + ":" + std::to_string(port_));
  port_ = bound;
  impl_->bound = true;
  impl_->server.listen_after_bind();
}

void IngestServer::stop() {
  if (!impl_) return;
  if (impl_->bound) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->bound = false;
}

SelfTestResult self_test(const std::string& host, int port, std::chrono::milliseconds timeout) {
  httplib::Client client(host, port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  IngestRecord probe;
  probe.node_address = kSelfTestNodeAddress;
  probe.seq = static_cast<std::uint32_t>(now);
  probe.t_ms = static_cast<std::uint64_t>(now);
  probe.kind = FrameKind::kData;
  probe.z = 1.0;

  auto res = client.Post("/ingest", format_record(probe) + "\n", "text/plain");
  if (!res || res->status != 200) return SelfTestResult::kFailed;
  std::string_view body = res->body;
  if (auto nl = body.find('\n'); nl != std::string_view::npos) body = body.substr(0, nl);
  const auto ack = parse_ack(body);
  const bool ok = ack == Ack::kOk || ack == Ack::kOkDuplicate;
  return ok ? SelfTestResult::kSuccess : SelfTestResult::kFailed;
}

}  // namespace tiersim
