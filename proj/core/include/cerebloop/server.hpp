#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cerebloop/session.hpp"

namespace cerebloop {

struct ServeOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see SessionServer::port().
  std::uint16_t port = 8765;
  /// Simulated seconds per wall-clock second; 0 runs unpaced.
  double speed = 1.0;
  bool start_paused = false;
  /// Raster slices buffered per client; beyond this the oldest queued slice
  /// is dropped. Telemetry, acknowledgements and status are never dropped.
  std::size_t client_queue_limit = 64;
  /// Raster events per client and frame beyond which the slice is cut.
  std::size_t raster_event_limit = 5000;
};

/// Serves one live session over WebSocket.
///
/// The simulation runs on the thread that calls run(); networking runs on
/// a private I/O thread. Client commands are queued and applied at frame
/// boundaries, so a slow or vanished client never stalls the loop. Message
/// schema: see docs/websocket.md.
class SessionServer {
public:
  /// Binds the listening socket; throws std::runtime_error if it is taken.
  SessionServer(SessionConfig cfg, ServeOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  std::uint16_t port() const;

  /// Runs the session to its configured duration or until stop().
  void run();
  /// Thread safe.
  void stop();

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace cerebloop
