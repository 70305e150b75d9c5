#pragma once

// JSON (de)serialization of the input files.
//
//   network.json     buses, branches, generators, ties
//   feeder-<dso>.json  one radial feeder
//   bids.json        array of offers; rows with "dso" are responsive loads
//                    ({id, dso, node, mw, price[, floor]}), rows with "bus" are
//                    generator offers ({id, bus, mw, price}; mw < 0 offers
//                    down-regulation, mw > 0 up-regulation)
//   config.json      market parameters

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "balmarket/grid_model.hpp"

namespace balmarket {

struct DatasetFiles {
    std::filesystem::path network;
    std::vector<std::filesystem::path> feeders;
    std::filesystem::path bids;
    std::filesystem::path config;
};

/// Generator offer row of bids.json.
struct GeneratorOffer {
    std::string id;
    BusId bus = 0;
    double mw = 0.0;
    double price = 0.0;
};

struct BidsDocument {
    std::vector<GeneratorOffer> generator_offers;
    std::vector<ResponsiveLoadBid> rl_bids;
};

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

TransmissionNetwork parse_network(const nlohmann::json& doc);
Feeder parse_feeder(const nlohmann::json& doc);
BidsDocument parse_bids(const nlohmann::json& doc);
MarketConfig parse_config(const nlohmann::json& doc);

nlohmann::json network_to_json(const TransmissionNetwork& network);
nlohmann::json feeder_to_json(const Feeder& feeder);
nlohmann::json bids_to_json(const std::vector<ResponsiveLoadBid>& bids,
                            const std::vector<Generator>& generators);
nlohmann::json config_to_json(const MarketConfig& config);

/// Assembles parsed documents into a system. Generator offers from the bids
/// document set reg_min/reg_max/price of the matching network generator.
/// Throws SchemaError when a generator ends up without an offer.
ValidatedSystem assemble_system(TransmissionNetwork network, std::vector<Feeder> feeders,
                                const BidsDocument& bids, MarketConfig config);

/// Reads, assembles and validates. Throws IoError, SchemaError or
/// ValidationError (carrying every violation found).
ValidatedSystem load_dataset(const DatasetFiles& files);

/// Documents that re-load into an equal system.
struct SerializedSystem {
    nlohmann::json network;
    std::vector<nlohmann::json> feeders;
    nlohmann::json bids;
    nlohmann::json config;
};

SerializedSystem serialize_system(const ValidatedSystem& system);
ValidatedSystem parse_serialized(const SerializedSystem& docs);

}  // namespace balmarket
