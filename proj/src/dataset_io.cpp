#include "balmarket/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace balmarket {

using nlohmann::json;

namespace {

// Field access with errors that name the file-relative location.
class Reader {
public:
    Reader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
        if (!doc_.is_object()) throw SchemaError(where_ + ": expected an object");
    }

    [[nodiscard]] bool has(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

    [[nodiscard]] double number(const char* key) const {
        const json& v = field(key);
        if (!v.is_number()) throw SchemaError(where_ + "." + key + ": expected a number");
        return v.get<double>();
    }
    [[nodiscard]] double number_or(const char* key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    [[nodiscard]] int integer(const char* key) const {
        const json& v = field(key);
        if (!v.is_number_integer()) throw SchemaError(where_ + "." + key + ": expected an integer");
        return v.get<int>();
    }
    [[nodiscard]] std::string text(const char* key) const {
        const json& v = field(key);
        if (!v.is_string()) throw SchemaError(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }
    [[nodiscard]] std::string text_or(const char* key, std::string fallback) const {
        return has(key) ? text(key) : fallback;
    }
    [[nodiscard]] const json& array(const char* key) const {
        const json& v = field(key);
        if (!v.is_array()) throw SchemaError(where_ + "." + key + ": expected an array");
        return v;
    }
    [[nodiscard]] std::string at(const char* key, std::size_t index) const {
        return where_ + "." + key + "[" + std::to_string(index) + "]";
    }

private:
    const json& field(const char* key) const {
        if (!doc_.contains(key)) throw SchemaError(where_ + ": missing field \"" + key + "\"");
        return doc_.at(key);
    }

    const json& doc_;
    std::string where_;
};

template <typename T, typename Parse>
std::vector<T> parse_array(const Reader& r, const char* key, Parse parse) {
    std::vector<T> out;
    const json& arr = r.array(key);
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse(Reader(arr[i], r.at(key, i))));
    return out;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.filename().string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

TransmissionNetwork parse_network(const json& doc) {
    Reader r(doc, "network");
    TransmissionNetwork net;
    net.description = r.text_or("description", "");
    net.buses = parse_array<Bus>(r, "buses", [](const Reader& b) {
        return Bus{b.integer("id"), b.text_or("name", ""), b.number("scheduled_injection")};
    });
    net.branches = parse_array<Branch>(r, "branches", [](const Reader& b) {
        return Branch{b.integer("id"), b.integer("from_bus"), b.integer("to_bus"), b.number("susceptance"),
                      b.number("flow_limit")};
    });
    net.generators = parse_array<Generator>(r, "generators", [](const Reader& g) {
        return Generator{g.text("id"), g.integer("bus"), g.number_or("reg_min", 0.0), g.number_or("reg_max", 0.0),
                         g.number_or("price", 0.0)};
    });
    net.ties = parse_array<TieLine>(r, "ties", [](const Reader& t) {
        return TieLine{t.integer("id"), t.integer("transmission_bus"), t.integer("dso"), t.number("flow_limit")};
    });
    return net;
}

Feeder parse_feeder(const json& doc) {
    Reader r(doc, "feeder");
    Feeder f;
    f.dso = r.integer("dso");
    f.description = r.text_or("description", "");
    f.nominal_voltage = r.number("nominal_voltage");
    f.root_node = r.integer("root_node");
    f.nodes = parse_array<FeederNode>(r, "nodes", [](const Reader& n) {
        return FeederNode{n.integer("node_id"), n.number("base_load_p"), n.number_or("base_load_q", 0.0)};
    });
    f.branches = parse_array<FeederBranch>(r, "branches", [](const Reader& b) {
        return FeederBranch{b.integer("from"), b.integer("to"), b.number("r"), b.number_or("x", 0.0)};
    });
    if (r.has("responsive_nodes")) {
        const json& arr = r.array("responsive_nodes");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number_integer()) throw SchemaError(r.at("responsive_nodes", i) + ": expected an integer");
            f.responsive_nodes.push_back(arr[i].get<int>());
        }
    }
    return f;
}

BidsDocument parse_bids(const json& doc) {
    if (!doc.is_array()) throw SchemaError("bids: expected an array");
    BidsDocument out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        Reader r(doc[i], "bids[" + std::to_string(i) + "]");
        if (r.has("dso")) {
            out.rl_bids.push_back(ResponsiveLoadBid{r.text("id"), r.integer("dso"), r.integer("node"), r.number("mw"),
                                                    r.number_or("floor", 0.0), r.number("price")});
        } else if (r.has("bus")) {
            out.generator_offers.push_back(GeneratorOffer{r.text("id"), r.integer("bus"), r.number("mw"),
                                                          r.number("price")});
        } else {
            throw SchemaError("bids[" + std::to_string(i) + "]: needs either \"dso\" (responsive load) or \"bus\" "
                              "(generator)");
        }
    }
    return out;
}

MarketConfig parse_config(const json& doc) {
    Reader r(doc, "config");
    MarketConfig c;
    c.description = r.text_or("description", "");
    c.penalty_price = r.number_or("penalty_price", c.penalty_price);
    c.conventional_cost = r.number_or("conventional_cost", c.conventional_cost);
    c.loss_price = r.number_or("loss_price", c.loss_price);
    c.settlement_mode = settlement_mode_from_string(r.text_or("settlement_mode", "pay-as-bid"));
    c.power_base = r.number_or("power_base", c.power_base);
    return c;
}

json network_to_json(const TransmissionNetwork& net) {
    json doc = json::object();
    if (!net.description.empty()) doc["description"] = net.description;
    doc["buses"] = json::array();
    for (const auto& b : net.buses)
        doc["buses"].push_back({{"id", b.id}, {"name", b.name}, {"scheduled_injection", b.scheduled_injection}});
    doc["branches"] = json::array();
    for (const auto& b : net.branches)
        doc["branches"].push_back({{"id", b.id},
                                   {"from_bus", b.from_bus},
                                   {"to_bus", b.to_bus},
                                   {"susceptance", b.susceptance},
                                   {"flow_limit", b.flow_limit}});
    doc["generators"] = json::array();
    for (const auto& g : net.generators)
        doc["generators"].push_back(
            {{"id", g.id}, {"bus", g.bus}, {"reg_min", g.reg_min}, {"reg_max", g.reg_max}, {"price", g.price}});
    doc["ties"] = json::array();
    for (const auto& t : net.ties)
        doc["ties"].push_back(
            {{"id", t.id}, {"transmission_bus", t.transmission_bus}, {"dso", t.dso}, {"flow_limit", t.flow_limit}});
    return doc;
}

json feeder_to_json(const Feeder& f) {
    json doc = json::object();
    doc["dso"] = f.dso;
    if (!f.description.empty()) doc["description"] = f.description;
    doc["nominal_voltage"] = f.nominal_voltage;
    doc["root_node"] = f.root_node;
    doc["responsive_nodes"] = f.responsive_nodes;
    doc["nodes"] = json::array();
    for (const auto& n : f.nodes)
        doc["nodes"].push_back(
            {{"node_id", n.node_id}, {"base_load_p", n.base_load_p}, {"base_load_q", n.base_load_q}});
    doc["branches"] = json::array();
    for (const auto& b : f.branches)
        doc["branches"].push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x}});
    return doc;
}

json bids_to_json(const std::vector<ResponsiveLoadBid>& bids, const std::vector<Generator>& generators) {
    json doc = json::array();
    for (const auto& g : generators) {
        // A bids row carries one signed quantity; two-sided ranges live only in network.json.
        if (g.reg_min < 0.0 && g.reg_max > 0.0) continue;
        const double mw = g.reg_min < 0.0 ? g.reg_min : g.reg_max;
        doc.push_back({{"id", g.id}, {"bus", g.bus}, {"mw", mw}, {"price", g.price}});
    }
    for (const auto& b : bids) {
        json row = {{"id", b.id}, {"dso", b.dso}, {"node", b.feeder_node}, {"mw", b.quantity}, {"price", b.price}};
        if (b.floor != 0.0) row["floor"] = b.floor;
        doc.push_back(row);
    }
    return doc;
}

json config_to_json(const MarketConfig& c) {
    json doc = json::object();
    if (!c.description.empty()) doc["description"] = c.description;
    doc["penalty_price"] = c.penalty_price;
    doc["conventional_cost"] = c.conventional_cost;
    doc["loss_price"] = c.loss_price;
    doc["settlement_mode"] = to_string(c.settlement_mode);
    doc["power_base"] = c.power_base;
    return doc;
}

ValidatedSystem assemble_system(TransmissionNetwork network, std::vector<Feeder> feeders, const BidsDocument& bids,
                                MarketConfig config) {
    for (const auto& offer : bids.generator_offers) {
        auto g = std::find_if(network.generators.begin(), network.generators.end(),
                              [&](const Generator& gen) { return gen.id == offer.id; });
        if (g == network.generators.end())
            throw ValidationError({{"dangling-reference", "generator offer " + offer.id +
                                                              " does not match a network generator"}});
        if (g->bus != offer.bus)
            throw ValidationError({{"gen-bus", "generator offer " + offer.id + " names bus " +
                                                   std::to_string(offer.bus) + " but the generator sits at bus " +
                                                   std::to_string(g->bus)}});
        g->reg_min = std::min(offer.mw, 0.0);
        g->reg_max = std::max(offer.mw, 0.0);
        g->price = offer.price;
    }
    for (const auto& g : network.generators) {
        if (g.reg_min == 0.0 && g.reg_max == 0.0 && g.price == 0.0)
            throw SchemaError("generator " + g.id + " has no regulation offer in network or bids");
    }
    std::sort(feeders.begin(), feeders.end(), [](const Feeder& a, const Feeder& b) { return a.dso < b.dso; });
    return ValidatedSystem{std::move(network), std::move(feeders), bids.rl_bids, std::move(config)};
}

namespace {

ValidatedSystem checked(ValidatedSystem system) {
    auto violations = validate_system(system);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return system;
}

}  // namespace

ValidatedSystem load_dataset(const DatasetFiles& files) {
    auto network = parse_network(read_json_file(files.network));
    std::vector<Feeder> feeders;
    for (const auto& path : files.feeders) feeders.push_back(parse_feeder(read_json_file(path)));
    auto bids = parse_bids(read_json_file(files.bids));
    auto config = parse_config(read_json_file(files.config));
    return checked(assemble_system(std::move(network), std::move(feeders), bids, std::move(config)));
}

SerializedSystem serialize_system(const ValidatedSystem& system) {
    SerializedSystem out;
    out.network = network_to_json(system.network);
    for (const auto& f : system.feeders) out.feeders.push_back(feeder_to_json(f));
    out.bids = bids_to_json(system.bids, system.network.generators);
    out.config = config_to_json(system.config);
    return out;
}

ValidatedSystem parse_serialized(const SerializedSystem& docs) {
    std::vector<Feeder> feeders;
    for (const auto& f : docs.feeders) feeders.push_back(parse_feeder(f));
    return checked(assemble_system(parse_network(docs.network), std::move(feeders), parse_bids(docs.bids),
                                   parse_config(docs.config)));
}

}  // namespace balmarket
