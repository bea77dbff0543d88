#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "emomap/embedding.hpp"
#include "emomap/error.hpp"

namespace emomap {

namespace {

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpReply post(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);

        httplib::Headers hdrs;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") content_type = v;
            else hdrs.emplace(k, v);
        }

        HttpReply reply;
        auto res = client.Post(path, hdrs, body, content_type);
        if (!res) {
            reply.status = 0;
            reply.error = httplib::to_string(res.error());
            return reply;
        }
        reply.status = res->status;
        reply.body = res->body;
        for (const auto& [k, v] : res->headers) {
            std::string key = k;
            std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
            reply.headers[key] = v;
        }
        return reply;
    }

private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
    return std::make_unique<HttplibTransport>(timeout);
}

}  // namespace emomap
