#include "crowdbot/http_bot.hpp"

#include "crowdbot/errors.hpp"
#include "httplib.h"

namespace crowdbot {

HttpBot::HttpBot(BotId id, std::string base_url, std::string path, std::chrono::milliseconds timeout)
    : id_(std::move(id)), base_url_(std::move(base_url)), path_(std::move(path)), timeout_(timeout) {
    if (base_url_.rfind("http://", 0) != 0 && base_url_.rfind("https://", 0) != 0) {
        throw ValidationError("http bot url must start with http:// or https://");
    }
    if (path_.empty() || path_.front() != '/') path_.insert(path_.begin(), '/');
    if (timeout_.count() <= 0) throw ValidationError("http bot timeout must be positive");
}

BotResponse HttpBot::respond(const BotContext& context) const {
    httplib::Client client(base_url_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path_, context_to_wire(context).dump(), "application/json");
    if (!res) throw Error("transport error calling " + base_url_ + path_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("bot endpoint returned status " + std::to_string(res->status));
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& ex) {
        throw Error(std::string("bot endpoint returned malformed JSON: ") + ex.what());
    }
    return response_from_wire(body);
}

}  // namespace crowdbot
