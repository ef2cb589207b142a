#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "vocaldyn/pipeline/stages.hpp"

namespace vocaldyn::pipeline {

// JSON over HTTP for the review UI:
//   GET  /api/performances                     record list
//   GET  /api/performances/{id}                one record
//   GET  /api/performances/{id}/visualization  VisualizationBundle (?width=N)
//   GET  /api/performances/{id}/audio          stem WAV for playback
//   POST /api/performances/{id}/decision       {"decision": "accept"|"reject", "note": "...", "by": "..."}
// Errors are {"error": message} with 404 (unknown id), 409 (status) or 400
// (malformed body). Anything else under / is served from static_dir.
struct ServerOptions {
    std::filesystem::path static_dir;  // empty: API only
    std::size_t default_width = 1000;
};

class ReviewServer {
public:
    ReviewServer(Manifest manifest, ServerOptions options = {});
    ~ReviewServer();
    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Binds without serving. Port 0 picks a free port; returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();
    void wait_until_ready() const;

    DecisionStore& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "HOST:PORT" -> (host, port). Throws InvalidArgument.
std::pair<std::string, int> parse_bind_address(const std::string& bind);

}  // namespace vocaldyn::pipeline
