#include "vocaldyn/pipeline/server.hpp"

#include <httplib.h>

#include <charconv>

#include "vocaldyn/io.hpp"

namespace vocaldyn::pipeline {
namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(Json{{"error", message}}.dump(), kJson);
}

// Maps library errors onto HTTP status codes.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const UnknownRecordError& e) {
            send_error(res, 404, e.what());
        } catch (const StatusError& e) {
            send_error(res, 409, e.what());
        } catch (const MissingInputError& e) {
            send_error(res, 409, e.what());
        } catch (const InvalidArgument& e) {
            send_error(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

}  // namespace

struct ReviewServer::Impl {
    DecisionStore store;
    ServerOptions options;
    httplib::Server http;

    Impl(Manifest m, ServerOptions o) : store(std::move(m)), options(std::move(o)) { routes(); }

    void routes() {
        http.Get("/api/performances", guarded([this](const httplib::Request&, httplib::Response& res) {
                     Json arr = Json::array();
                     for (const auto& r : store.snapshot()) arr.push_back(r.to_json());
                     res.set_content(arr.dump(), kJson);
                 }));
        http.Get("/api/performances/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     res.set_content(store.get(req.path_params.at("id")).to_json().dump(), kJson);
                 }));
        http.Get("/api/performances/:id/visualization",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                     std::size_t width = options.default_width;
                     if (req.has_param("width")) {
                         const auto w = req.get_param_value("width");
                         const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), width);
                         if (ec != std::errc() || p != w.data() + w.size() || width == 0 || width > 100000)
                             throw InvalidArgument("width must be an integer in [1, 100000]");
                     }
                     const auto m = store.manifest();
                     const auto& rec = m.find(req.path_params.at("id"));
                     res.set_content(build_visualization(m, rec, width).to_json().dump(), kJson);
                 }));
        http.Get("/api/performances/:id/audio", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto m = store.manifest();
                     const auto& rec = m.find(req.path_params.at("id"));
                     const auto& p = rec.stem_path.empty() ? rec.audio_path : rec.stem_path;
                     const auto path = m.resolve(p);
                     if (!std::filesystem::is_regular_file(path))
                         throw MissingInputError("audio for '" + rec.id + "' is missing");
                     const auto bytes = io::read_file(path);
                     res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
                 }));
        http.Post("/api/performances/:id/decision",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto& id = req.path_params.at("id");
                      store.get(id);  // 404 before body validation
                      Json body;
                      try {
                          body = Json::parse(req.body);
                      } catch (const nlohmann::json::exception&) {
                          throw InvalidArgument("request body is not valid JSON");
                      }
                      if (!body.is_object() || !body.contains("decision") || !body["decision"].is_string())
                          throw InvalidArgument("body must be an object with a string 'decision'");
                      for (const char* k : {"note", "by"})
                          if (body.contains(k) && !body[k].is_string())
                              throw InvalidArgument(std::string("'") + k + "' must be a string");
                      const auto rec = store.record_decision(id, body["decision"].get<std::string>(),
                                                             body.value("note", ""), body.value("by", "reviewer"));
                      res.set_content(rec.to_json().dump(), kJson);
                  }));
        if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir))
            http.set_mount_point("/", options.static_dir.string());
    }
};

ReviewServer::ReviewServer(Manifest manifest, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(manifest), std::move(options))) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->http.bind_to_any_port(host);
        if (p <= 0) throw InvalidArgument("cannot bind " + host);
        return p;
    }
    if (!impl_->http.bind_to_port(host, port))
        throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ReviewServer::serve() { impl_->http.listen_after_bind(); }
void ReviewServer::stop() {
    if (impl_) impl_->http.stop();
}
void ReviewServer::wait_until_ready() const { impl_->http.wait_until_ready(); }
DecisionStore& ReviewServer::store() { return impl_->store; }

std::pair<std::string, int> parse_bind_address(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) throw InvalidArgument("bind address must be HOST:PORT");
    int port = -1;
    const char* b = bind.data() + colon + 1;
    const char* e = bind.data() + bind.size();
    const auto [p, ec] = std::from_chars(b, e, port);
    if (ec != std::errc() || p != e || port < 0 || port > 65535) throw InvalidArgument("invalid port in '" + bind + "'");
    return {bind.substr(0, colon), port};
}

}  // namespace vocaldyn::pipeline
