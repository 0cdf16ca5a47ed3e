#include "crowdbot/registry.hpp"

#include <fstream>
#include <set>

#include "crowdbot/builtin_bots.hpp"
#include "crowdbot/errors.hpp"
#include "crowdbot/http_bot.hpp"
#include "crowdbot/retrieval.hpp"

namespace crowdbot {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

Gazetteer gazetteer_from(const nlohmann::json& opts, const std::filesystem::path& base) {
    if (opts.contains("gazetteer")) return Gazetteer::load(resolve(base, opts["gazetteer"].get<std::string>()));
    return Gazetteer::builtin();
}

std::shared_ptr<const Bot> make_bot(const std::string& id, const std::string& type, const nlohmann::json& opts,
                                    const std::filesystem::path& base,
                                    const std::shared_ptr<const VectorTable>& table) {
    if (type == "filler") {
        if (opts.contains("fillers")) return std::make_shared<FillerBot>(id, opts["fillers"].get<std::vector<std::string>>());
        return std::make_shared<FillerBot>(id);
    }
    if (type == "retrieval") {
        if (!table) throw ValidationError("retrieval bot " + id + " needs an embedding table");
        auto store = std::make_shared<PairStore>(load_store(resolve(base, opts.at("pairs").get<std::string>()), *table));
        return std::make_shared<RetrievalBot>(id, std::move(store), table, opts.value("k", std::size_t{2}));
    }
    if (type == "weather") {
        std::shared_ptr<const WeatherProvider> provider;
        if (opts.contains("fixture")) {
            provider = std::make_shared<FixtureWeatherProvider>(
                FixtureWeatherProvider::load(resolve(base, opts["fixture"].get<std::string>())));
        } else {
            provider = std::make_shared<FixtureWeatherProvider>(FixtureWeatherProvider::builtin());
        }
        return std::make_shared<WeatherBot>(id, gazetteer_from(opts, base), std::move(provider));
    }
    if (type == "restaurant") {
        std::shared_ptr<const RestaurantProvider> provider;
        if (opts.contains("fixture")) {
            provider = std::make_shared<FixtureRestaurantProvider>(
                FixtureRestaurantProvider::load(resolve(base, opts["fixture"].get<std::string>())));
        } else {
            provider = std::make_shared<FixtureRestaurantProvider>(FixtureRestaurantProvider::builtin());
        }
        return std::make_shared<RestaurantBot>(id, gazetteer_from(opts, base), std::move(provider),
                                               opts.value("max_suggestions", std::size_t{3}));
    }
    if (type == "echo") return std::make_shared<EchoBot>(id, opts.at("reply").get<std::string>());
    if (type == "http") {
        return std::make_shared<HttpBot>(id, opts.at("url").get<std::string>(), opts.value("path", std::string("/respond")),
                                         std::chrono::milliseconds{opts.value("timeout_ms", 5000)});
    }
    throw ValidationError("unknown bot type '" + type + "'");
}

}  // namespace

std::vector<std::shared_ptr<const Bot>> BotRegistry::instances() const {
    std::vector<std::shared_ptr<const Bot>> out;
    for (const auto& b : bots) out.push_back(b.bot);
    return out;
}

const RegisteredBot* BotRegistry::find(const BotId& id) const {
    for (const auto& b : bots) {
        if (b.bot->id() == id) return &b;
    }
    return nullptr;
}

BotRegistry parse_registry(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           std::shared_ptr<const VectorTable> table) {
    BotRegistry reg;
    std::set<std::string> seen;
    try {
        for (const auto& entry : doc.at("bots")) {
            const auto id = entry.at("id").get<std::string>();
            if (id.empty()) throw ValidationError("bot id must be non-empty");
            if (!seen.insert(id).second) throw ValidationError("duplicate bot id '" + id + "'");
            const auto opts = entry.value("options", nlohmann::json::object());
            RegisteredBot rb;
            rb.bot = make_bot(id, entry.at("type").get<std::string>(), opts, base_dir, table);
            rb.examples = entry.value("examples", std::vector<std::string>{});
            rb.meta = entry.value("meta", nlohmann::json::object());
            reg.bots.push_back(std::move(rb));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("bad registry: ") + ex.what());
    }
    return reg;
}

BotRegistry load_registry(const std::filesystem::path& path, std::shared_ptr<const VectorTable> table) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open registry " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(path.string() + ": " + ex.what(), 1);
    }
    return parse_registry(doc, path.parent_path(), std::move(table));
}

}  // namespace crowdbot
