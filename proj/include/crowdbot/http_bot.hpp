#pragma once

#include <chrono>
#include <string>

#include "crowdbot/bots.hpp"

namespace crowdbot {

/// Out-of-process bot reached over HTTP: POST <path> with the wire context,
/// expects 200 and a wire reply. Transport errors and non-200 replies throw,
/// which the invoker maps to a decline.
class HttpBot final : public Bot {
public:
    /// `base_url` is scheme://host[:port]; `path` defaults to /respond.
    HttpBot(BotId id, std::string base_url, std::string path = "/respond",
            std::chrono::milliseconds timeout = std::chrono::milliseconds{5000});

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext& context) const override;

    const std::string& base_url() const { return base_url_; }
    const std::string& path() const { return path_; }

private:
    BotId id_;
    std::string base_url_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

}  // namespace crowdbot
