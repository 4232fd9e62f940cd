#include "cerebloop/server.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"

namespace cerebloop {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

namespace {

class Client;

struct Inbound {
  std::shared_ptr<Client> client;
  std::string text;
};

/// Shared between the I/O thread and the simulation thread.
struct Mailbox {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Inbound> commands;
  std::vector<std::shared_ptr<Client>> joined;
};

json error_message(const std::string& reason, const std::string& id = {}) {
  json j = {{"v", kCommandSchemaVersion}, {"type", "error"}, {"reason", reason}};
  if (!id.empty()) j["id"] = id;
  return j;
}

/// One WebSocket connection. All members are touched on the I/O thread only,
/// except `closed` and the subscription, which the simulation thread owns.
class Client : public std::enable_shared_from_this<Client> {
public:
  Client(tcp::socket socket, Mailbox& mailbox, std::size_t queue_limit)
      : ws_(std::move(socket)), mailbox_(mailbox), limit_(queue_limit) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      {
        std::lock_guard lock(self->mailbox_.mu);
        self->mailbox_.joined.push_back(self);
      }
      self->mailbox_.cv.notify_all();
      self->read();
    });
  }

  /// Called from any thread.
  void send(std::shared_ptr<const std::string> msg, bool raster) {
    if (closed) return;
    asio::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg), raster] {
      self->push(std::move(msg), raster);
    });
  }

  void shutdown() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed) return;
      self->closing_ = true;
      if (!self->writing_) self->finish_close();
    });
  }

  std::atomic<bool> closed{false};
  std::vector<PopulationId> raster;  // simulation thread

private:
  struct Outgoing {
    std::shared_ptr<const std::string> text;
    bool raster;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      {
        std::lock_guard lock(self->mailbox_.mu);
        self->mailbox_.commands.push_back({self, std::move(text)});
      }
      self->mailbox_.cv.notify_all();
      self->read();
    });
  }

  void push(std::shared_ptr<const std::string> msg, bool raster) {
    if (closed || closing_) return;
    if (raster) {
      // The head may be in flight, so only entries after it are dropped.
      const auto first = queue_.begin() + (writing_ ? 1 : 0);
      const auto queued = static_cast<std::size_t>(
          std::count_if(first, queue_.end(), [](const Outgoing& o) { return o.raster; }));
      if (queued >= limit_) {
        const auto oldest = std::find_if(first, queue_.end(), [](const Outgoing& o) { return o.raster; });
        if (oldest == queue_.end()) return;
        queue_.erase(oldest);
      }
    }
    queue_.push_back({std::move(msg), raster});
    if (!writing_) write();
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) return self->write();
      if (self->closing_) self->finish_close();
    });
  }

  void finish_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->close(); });
  }

  void close() {
    closed = true;
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
    mailbox_.cv.notify_all();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Mailbox& mailbox_;
  std::size_t limit_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool closing_ = false;
};

}  // namespace

struct SessionServer::Impl {
  Impl(SessionConfig cfg, ServeOptions opt)
      : session(std::move(cfg)), options(opt), acceptor(ioc) {
    const tcp::endpoint ep(asio::ip::make_address(options.address), options.port);
    try {
      acceptor.open(ep.protocol());
      acceptor.set_option(asio::socket_base::reuse_address(true));
      acceptor.bind(ep);
      acceptor.listen();
    } catch (const boost::system::system_error& e) {
      throw std::runtime_error("cannot listen on " + options.address + ":" + std::to_string(options.port) + ": " +
                               e.what());
    }
    paused = options.start_paused;
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Client>(std::move(socket), mailbox, options.client_queue_limit);
      c->start();
      accept();
    });
  }

  void send(Client& c, const json& j, bool raster = false) {
    c.send(std::make_shared<const std::string>(j.dump()), raster);
  }

  void broadcast(const json& j) {
    auto msg = std::make_shared<const std::string>(j.dump());
    for (auto& c : clients) c->send(msg, false);
  }

  json status(const char* state) const {
    return {{"v", kCommandSchemaVersion}, {"type", "status"}, {"state", state}, {"t", session.time_s()}};
  }

  json hello() const {
    const auto& cfg = session.config();
    json pops = json::array();
    for (const auto& p : session.network().populations()) {
      pops.push_back({{"name", p.name}, {"size", p.size}, {"first", p.first}});
    }
    return {{"v", kCommandSchemaVersion},
            {"type", "hello"},
            {"session",
             {{"seed", cfg.seed},
              {"duration_s", cfg.duration_s},
              {"tick_ms", cfg.tick_ms},
              {"telemetry_period_ms", cfg.telemetry_period_ms},
              {"mode", to_string(cfg.numeric.kind)}}},
            {"populations", pops},
            {"paused", paused.load()},
            {"t", session.time_s()}};
  }

  json ack(const Command& cmd, const std::string& id, double at, bool ok, const std::string& message) const {
    json j = {{"v", kCommandSchemaVersion}, {"type", "ack"}, {"command", to_string(cmd.kind)},
              {"applied_at", at},           {"ok", ok}};
    if (!id.empty()) j["id"] = id;
    if (!message.empty()) j["message"] = message;
    return j;
  }

  json snapshot_message(const WeightSnapshot& s, const std::string& id) const {
    json projs = json::array();
    for (const auto& p : s.projections) {
      double sum = 0.0;
      double lo = p.weights.empty() ? 0.0 : p.weights.front();
      double hi = lo;
      for (double w : p.weights) {
        sum += w;
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
      projs.push_back({{"name", p.name},
                       {"mean", p.weights.empty() ? 0.0 : sum / static_cast<double>(p.weights.size())},
                       {"min", lo},
                       {"max", hi},
                       {"weights", p.weights}});
    }
    json j = {{"v", kCommandSchemaVersion}, {"type", "snapshot"}, {"t", s.t_s}, {"projections", projs}};
    if (!id.empty()) j["id"] = id;
    return j;
  }

  json telemetry(const TelemetryFrame& f) const {
    json counts = json::object();
    const auto& pops = session.network().populations();
    for (std::size_t p = 0; p < pops.size(); ++p) counts[pops[p].name] = f.population_counts[p];
    return {{"v", kCommandSchemaVersion},
            {"type", "telemetry"},
            {"frame", f.index},
            {"t", f.row.t},
            {"phi_set", f.row.phi_set},
            {"phi_act", f.row.phi_act},
            {"eps_l", f.row.eps_l},
            {"eps_r", f.row.eps_r},
            {"omega_l", f.row.omega_l},
            {"omega_r", f.row.omega_r},
            {"learning", f.learning},
            {"counts", counts}};
  }

  void send_raster(Client& c, const TelemetryFrame& f) {
    const auto& net = session.network();
    const double tick_ms = session.config().tick_ms;
    json pops = json::object();
    for (auto p : c.raster) pops[net.population(p).name] = json::array();
    std::size_t kept = 0;
    std::size_t dropped = 0;
    for (const auto& s : f.spikes) {
      const auto p = net.population_of(s.neuron);
      if (std::find(c.raster.begin(), c.raster.end(), p) == c.raster.end()) continue;
      if (kept >= options.raster_event_limit) {
        ++dropped;
        continue;
      }
      pops[net.population(p).name].push_back({static_cast<double>(s.t) * tick_ms, s.neuron - net.population(p).first});
      ++kept;
    }
    const double t1 = f.row.t;
    const double t0 = t1 - session.config().telemetry_period_ms * 1e-3;
    send(c,
         {{"v", kCommandSchemaVersion},
          {"type", "raster"},
          {"frame", f.index},
          {"t0", t0},
          {"t1", t1},
          {"populations", pops},
          {"dropped", dropped}},
         true);
  }

  void handle(const Inbound& in) {
    Command cmd;
    try {
      cmd = command_from_json(in.text);
    } catch (const std::exception& e) {
      std::string id;
      try {
        const auto j = json::parse(in.text);
        if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
      } catch (...) {
      }
      send(*in.client, error_message(e.what(), id));
      return;
    }
    switch (cmd.kind) {
      case CommandKind::pause:
        paused = true;
        send(*in.client, ack(cmd, cmd.id, session.time_s(), true, {}));
        broadcast(status("paused"));
        return;
      case CommandKind::resume:
        paused = false;
        pace_reset = true;
        send(*in.client, ack(cmd, cmd.id, session.time_s(), true, {}));
        broadcast(status("running"));
        return;
      case CommandKind::subscribe_raster: {
        std::vector<PopulationId> ids;
        for (const auto& name : cmd.populations) {
          const auto id = session.network().find_population(name);
          if (!id) {
            send(*in.client, error_message("unknown population '" + name + "'", cmd.id));
            return;
          }
          ids.push_back(*id);
        }
        in.client->raster = std::move(ids);
        session.set_capture_spikes(true);
        send(*in.client, ack(cmd, cmd.id, session.time_s(), true, {}));
        return;
      }
      default:
        break;
    }
    const std::string token = "#" + std::to_string(next_token++);
    routes[token] = {in.client, cmd.id};
    cmd.id = token;
    session.enqueue(std::move(cmd));
  }

  void deliver_results() {
    for (auto& r : session.take_results()) {
      const auto it = routes.find(r.command.id);
      if (it == routes.end()) continue;  // scripted timeline entry
      auto [client, id] = it->second;
      routes.erase(it);
      send(*client, ack(r.command, id, r.applied_at_s, r.ok, r.message));
      if (r.snapshot) send(*client, snapshot_message(*r.snapshot, id));
    }
  }

  void sync_clients() {
    std::deque<Inbound> inbox;
    {
      std::lock_guard lock(mailbox.mu);
      for (auto& c : mailbox.joined) {
        clients.push_back(c);
        send(*c, hello());
      }
      mailbox.joined.clear();
      inbox.swap(mailbox.commands);
    }
    for (const auto& in : inbox) handle(in);
    std::erase_if(clients, [](const auto& c) { return c->closed.load(); });
    bool any_raster = false;
    for (const auto& c : clients) any_raster = any_raster || !c->raster.empty();
    session.set_capture_spikes(any_raster);
  }

  void run() {
    accept();
    io_thread = std::thread([this] { ioc.run(); });
    using clock = std::chrono::steady_clock;
    auto origin = clock::now();
    double origin_sim = session.time_s();
    bool was_paused = !paused;
    while (!stopping && !session.finished()) {
      sync_clients();
      if (paused) {
        if (!was_paused) broadcast(status("paused"));
        was_paused = true;
        std::unique_lock lock(mailbox.mu);
        mailbox.cv.wait_for(lock, std::chrono::milliseconds(50));
        continue;
      }
      if (was_paused || pace_reset) {
        origin = clock::now();
        origin_sim = session.time_s();
        pace_reset = false;
        was_paused = false;
      }
      const auto frame = session.step_frame();
      deliver_results();
      broadcast(telemetry(frame));
      for (auto& c : clients) {
        if (!c->raster.empty()) send_raster(*c, frame);
      }
      if (options.speed > 0.0) {
        const double wall = (session.time_s() - origin_sim) / options.speed;
        std::this_thread::sleep_until(origin + std::chrono::duration_cast<clock::duration>(
                                                   std::chrono::duration<double>(wall)));
      }
    }
    sync_clients();
    broadcast(status(session.finished() ? "finished" : "stopped"));
    for (auto& c : clients) c->shutdown();
    // Let the closing handshakes drain before the I/O thread stops.
    asio::post(ioc, [this] {
      beast::error_code ignored;
      acceptor.close(ignored);
    });
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (std::chrono::steady_clock::now() < deadline) {
      bool all_closed = true;
      for (const auto& c : clients) all_closed = all_closed && c->closed.load();
      if (all_closed) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ioc.stop();
    io_thread.join();
  }

  Session session;
  ServeOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::thread io_thread;
  Mailbox mailbox;
  std::vector<std::shared_ptr<Client>> clients;
  std::map<std::string, std::pair<std::shared_ptr<Client>, std::string>> routes;
  std::uint64_t next_token = 0;
  std::atomic<bool> paused{false};
  std::atomic<bool> stopping{false};
  bool pace_reset = false;
};

SessionServer::SessionServer(SessionConfig cfg, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(cfg), options)) {}

SessionServer::~SessionServer() {
  if (impl_->io_thread.joinable()) {
    impl_->ioc.stop();
    impl_->io_thread.join();
  }
}

std::uint16_t SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::run() { impl_->run(); }

void SessionServer::stop() {
  impl_->stopping = true;
  impl_->mailbox.cv.notify_all();
}

}  // namespace cerebloop
