#include "crowdbot/builtin_bots.hpp"

#include <fstream>
#include <random>

#include "crowdbot/errors.hpp"

namespace crowdbot {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(path.string() + ": " + ex.what(), 1);
    }
}

}  // namespace

std::vector<std::string> FillerBot::default_fillers() {
    return {"Is there anything else I can help you with?",
            "Thanks",
            "I don't know",
            "Okay",
            "Sure",
            "You're welcome!",
            "Let me check.",
            "Could you tell me more?",
            "Sounds good!",
            "Glad to help!",
            "Hello! How can I help you?",
            "Sorry, I'm not sure.",
            "Great!"};
}

FillerBot::FillerBot(BotId id, std::vector<std::string> fillers) : id_(std::move(id)), fillers_(std::move(fillers)) {
    if (fillers_.empty()) throw ValidationError("filler list must not be empty");
}

BotResponse FillerBot::respond(const BotContext& context) const {
    std::mt19937_64 rng(context.seed);
    std::uniform_int_distribution<std::size_t> pick(0, fillers_.size() - 1);
    return BotResponse::say(fillers_[pick(rng)]);
}

RetrievalBot::RetrievalBot(BotId id, std::shared_ptr<const PairStore> store, std::shared_ptr<const VectorTable> table,
                           std::size_t k)
    : id_(std::move(id)), store_(std::move(store)), table_(std::move(table)), k_(k) {
    if (!store_ || !table_) throw ValidationError("retrieval bot needs a store and a vector table");
    if (k_ == 0) throw ValidationError("k must be at least 1");
}

BotResponse RetrievalBot::respond(const BotContext& context) const {
    std::mt19937_64 rng(context.seed);
    auto text = retrieve(context.user_message, *store_, *table_, k_, rng);
    if (!text) return BotResponse::decline();
    return BotResponse::say(std::move(*text));
}

Gazetteer::Gazetteer(std::vector<City> cities) : cities_(std::move(cities)) {
    for (const auto& c : cities_) {
        auto t = tokenize(c.name);
        if (t.empty()) throw ValidationError("gazetteer entry with empty name");
        tokens_.push_back(std::move(t));
    }
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::vector<City> cities;
    try {
        for (const auto& e : j) cities.push_back(City{e.at("name").get<std::string>(), e.value("country", std::string())});
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(path.string() + ": " + ex.what(), 1);
    }
    return Gazetteer(std::move(cities));
}

Gazetteer Gazetteer::builtin() {
    return Gazetteer({{"Kabul", "Afghanistan"},
                      {"Seattle", "United States"},
                      {"Pittsburgh", "United States"},
                      {"New York", "United States"},
                      {"San Francisco", "United States"},
                      {"Los Angeles", "United States"},
                      {"Chicago", "United States"},
                      {"Boston", "United States"},
                      {"London", "United Kingdom"},
                      {"Paris", "France"},
                      {"Berlin", "Germany"},
                      {"Tokyo", "Japan"},
                      {"Taipei", "Taiwan"},
                      {"Toronto", "Canada"}});
}

std::optional<City> Gazetteer::find_in(std::string_view text) const {
    const auto words = tokenize(text);
    std::optional<std::size_t> best;
    std::size_t best_len = 0;
    for (std::size_t start = 0; start < words.size(); ++start) {
        for (std::size_t c = 0; c < cities_.size(); ++c) {
            const auto& name = tokens_[c];
            if (name.size() <= best_len || start + name.size() > words.size()) continue;
            if (std::equal(name.begin(), name.end(), words.begin() + static_cast<std::ptrdiff_t>(start))) {
                best = c;
                best_len = name.size();
            }
        }
    }
    if (!best) return std::nullopt;
    return cities_[*best];
}

FixtureWeatherProvider FixtureWeatherProvider::load(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::map<std::string, WeatherReport> reports;
    for (const auto& [city, r] : j.items()) {
        reports[city] = WeatherReport{r.at("day").get<std::string>(), r.at("summary").get<std::string>()};
    }
    return FixtureWeatherProvider(std::move(reports));
}

FixtureWeatherProvider FixtureWeatherProvider::builtin() {
    return FixtureWeatherProvider(
        {{"Kabul", {"Friday", "Cloudy with a few showers. High 79F. Winds NW at 5 to 10 mph. Chance of rain 30%."}},
         {"Seattle", {"Monday", "Light rain. High 58F. Winds S at 10 to 15 mph. Chance of rain 80%."}},
         {"Pittsburgh", {"Tuesday", "Partly cloudy. High 71F. Winds W at 5 to 10 mph."}},
         {"New York", {"Wednesday", "Sunny. High 84F. Winds SW at 10 mph."}},
         {"London", {"Thursday", "Overcast. High 64F. Winds E at 5 mph. Chance of rain 40%."}}});
}

WeatherReport FixtureWeatherProvider::forecast(const City& city) const {
    auto it = reports_.find(city.name);
    if (it == reports_.end()) throw ProviderError("no forecast for " + city.name);
    return it->second;
}

FixtureRestaurantProvider FixtureRestaurantProvider::load(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::map<std::string, std::vector<std::string>> lists;
    for (const auto& [city, names] : j.items()) lists[city] = names.get<std::vector<std::string>>();
    return FixtureRestaurantProvider(std::move(lists));
}

FixtureRestaurantProvider FixtureRestaurantProvider::builtin() {
    return FixtureRestaurantProvider({{"Seattle", {"Shiro's Sushi", "Umi Sake House", "Sushi Kashiba"}},
                                      {"Pittsburgh", {"Umami", "Chaya", "Penn Ave Fish Company"}},
                                      {"New York", {"Sushi Nakazawa", "Katz's Delicatessen", "Joe's Pizza"}},
                                      {"Kabul", {"Sufi Restaurant", "Herat Restaurant"}}});
}

std::vector<std::string> FixtureRestaurantProvider::suggestions(const City& city, std::string_view) const {
    auto it = lists_.find(city.name);
    if (it == lists_.end()) throw ProviderError("no restaurants for " + city.name);
    return it->second;
}

WeatherBot::WeatherBot(BotId id, Gazetteer gazetteer, std::shared_ptr<const WeatherProvider> provider)
    : id_(std::move(id)), gazetteer_(std::move(gazetteer)), provider_(std::move(provider)) {
    if (!provider_) throw ValidationError("weather bot needs a provider");
}

BotResponse WeatherBot::respond(const BotContext& context) const {
    const auto city = gazetteer_.find_in(context.user_message);
    if (!city) return BotResponse::say(std::string(kFallback));
    try {
        const WeatherReport r = provider_->forecast(*city);
        std::string place = city->country.empty() ? city->name : city->name + ", " + city->country;
        return BotResponse::say(r.day + "'s weather forecast for [" + place + "]: " + r.summary);
    } catch (const ProviderError&) {
        return BotResponse::decline();
    }
}

RestaurantBot::RestaurantBot(BotId id, Gazetteer gazetteer, std::shared_ptr<const RestaurantProvider> provider,
                             std::size_t max_suggestions)
    : id_(std::move(id)),
      gazetteer_(std::move(gazetteer)),
      provider_(std::move(provider)),
      max_suggestions_(max_suggestions) {
    if (!provider_) throw ValidationError("restaurant bot needs a provider");
    if (max_suggestions_ == 0) throw ValidationError("max_suggestions must be positive");
}

BotResponse RestaurantBot::respond(const BotContext& context) const {
    const auto city = gazetteer_.find_in(context.user_message);
    if (!city) return BotResponse::say(std::string(kFallback));
    try {
        auto names = provider_->suggestions(*city, context.user_message);
        if (names.empty()) return BotResponse::decline();
        if (names.size() > max_suggestions_) names.resize(max_suggestions_);
        std::string text = "Here are some restaurants in " + city->name + ": ";
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (i) text += ", ";
            text += names[i];
        }
        return BotResponse::say(text + ".");
    } catch (const ProviderError&) {
        return BotResponse::decline();
    }
}

}  // namespace crowdbot
