#include "balmarket/cli_io.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "balmarket/dataset_io.hpp"

namespace balmarket {

using nlohmann::json;

namespace {

lp::Status status_from_string(const std::string& s) {
    if (s == "optimal") return lp::Status::Optimal;
    if (s == "infeasible") return lp::Status::Infeasible;
    if (s == "unbounded") return lp::Status::Unbounded;
    throw SchemaError("unknown clearing status " + s);
}

CheaperOption cheaper_from_string(const std::string& s) {
    if (s == "RL") return CheaperOption::ResponsiveLoads;
    if (s == "conventional") return CheaperOption::Conventional;
    throw SchemaError("unknown cheaper_option " + s);
}

json clearing_to_json(const CentralClearingResult& c) {
    json dsos = json::array();
    for (const auto& d : c.dsos)
        dsos.push_back({{"dso", d.dso}, {"bus", d.bus}, {"steps", d.steps}, {"total", d.total},
                        {"tie_flow", d.tie_flow}});
    return {{"status", lp::to_string(c.status)},
            {"imbalance", c.imbalance},
            {"generator_regulation", c.generator_regulation},
            {"dsos", dsos},
            {"slack_up", c.slack_up},
            {"slack_down", c.slack_down},
            {"recourse_bus", c.recourse_bus},
            {"angles", c.angles},
            {"flows", c.flows},
            {"objective", c.objective},
            {"marginal_price", c.marginal_price}};
}

CentralClearingResult clearing_from_json(const json& j) {
    CentralClearingResult c;
    c.status = status_from_string(j.at("status").get<std::string>());
    c.imbalance = j.at("imbalance").get<std::vector<double>>();
    c.generator_regulation = j.at("generator_regulation").get<std::vector<double>>();
    for (const auto& d : j.at("dsos"))
        c.dsos.push_back({d.at("dso").get<int>(), d.at("bus").get<int>(), d.at("steps").get<std::vector<double>>(),
                          d.at("total").get<double>(), d.at("tie_flow").get<double>()});
    c.slack_up = j.at("slack_up").get<double>();
    c.slack_down = j.at("slack_down").get<double>();
    c.recourse_bus = j.at("recourse_bus").get<int>();
    c.angles = j.at("angles").get<std::vector<double>>();
    c.flows = j.at("flows").get<std::vector<double>>();
    c.objective = j.at("objective").get<double>();
    c.marginal_price = j.at("marginal_price").get<double>();
    return c;
}

json local_to_json(const LocalDispatch& l) {
    json rows = json::array();
    for (const auto& d : l.dispatch)
        rows.push_back({{"rl_id", d.rl_id}, {"node", d.node}, {"reduction", d.reduction}, {"price", d.price}});
    return {{"dso", l.dso},           {"cleared", l.cleared},       {"dispatch", rows},
            {"bid_cost", l.bid_cost}, {"loss_before", l.loss_before}, {"loss_after", l.loss_after},
            {"loss_cost", l.loss_cost}, {"objective", l.objective}};
}

LocalDispatch local_from_json(const json& j) {
    LocalDispatch l;
    l.dso = j.at("dso").get<int>();
    l.cleared = j.at("cleared").get<double>();
    for (const auto& d : j.at("dispatch"))
        l.dispatch.push_back({d.at("rl_id").get<std::string>(), d.at("node").get<int>(),
                              d.at("reduction").get<double>(), d.at("price").get<double>()});
    l.bid_cost = j.at("bid_cost").get<double>();
    l.loss_before = j.at("loss_before").get<double>();
    l.loss_after = j.at("loss_after").get<double>();
    l.loss_cost = j.at("loss_cost").get<double>();
    l.objective = j.at("objective").get<double>();
    return l;
}

json settlement_to_json(const SettlementReport& s) {
    json payments = json::array();
    for (const auto& p : s.payments)
        payments.push_back(
            {{"participant", p.participant}, {"kind", p.kind}, {"quantity", p.quantity}, {"payment", p.payment}});
    json profits = json::array();
    for (const auto& p : s.dso_profit)
        profits.push_back({{"dso", p.dso},
                           {"revenue", p.revenue},
                           {"rl_payments", p.rl_payments},
                           {"loss_cost_delta", p.loss_cost_delta},
                           {"profit", p.profit}});
    return {{"mode", to_string(s.mode)},
            {"payments", payments},
            {"dso_profit", profits},
            {"slack_cost", s.slack_cost},
            {"tso_cost", s.tso_cost},
            {"conventional_cost", s.conventional_cost},
            {"cheaper_option", to_string(s.cheaper_option)}};
}

SettlementReport settlement_from_json(const json& j) {
    SettlementReport s;
    s.mode = settlement_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& p : j.at("payments"))
        s.payments.push_back({p.at("participant").get<std::string>(), p.at("kind").get<std::string>(),
                              p.at("quantity").get<double>(), p.at("payment").get<double>()});
    for (const auto& p : j.at("dso_profit"))
        s.dso_profit.push_back({p.at("dso").get<int>(), p.at("revenue").get<double>(),
                                p.at("rl_payments").get<double>(), p.at("loss_cost_delta").get<double>(),
                                p.at("profit").get<double>()});
    s.slack_cost = j.at("slack_cost").get<double>();
    s.tso_cost = j.at("tso_cost").get<double>();
    s.conventional_cost = j.at("conventional_cost").get<double>();
    s.cheaper_option = cheaper_from_string(j.at("cheaper_option").get<std::string>());
    return s;
}

}  // namespace

json record_to_json(const HourRecord& r) {
    json bids = json::array();
    for (const auto& b : r.stepped_bids) {
        json steps = json::array();
        for (const auto& s : b.steps)
            steps.push_back({{"quantity", s.quantity}, {"price", s.price}, {"rl_ids", s.rl_ids}});
        bids.push_back({{"dso", b.dso}, {"steps", steps}});
    }
    json locals = json::array();
    for (const auto& l : r.local_dispatches) locals.push_back(local_to_json(l));
    return {{"hour", r.hour},
            {"imbalance", r.imbalance},
            {"stepped_bids", bids},
            {"clearing", clearing_to_json(r.clearing)},
            {"local_dispatches", locals},
            {"settlement", settlement_to_json(r.settlement)}};
}

HourRecord record_from_json(const json& j) {
    try {
        HourRecord r;
        r.hour = j.at("hour").get<int>();
        r.imbalance = j.at("imbalance").get<std::vector<double>>();
        for (const auto& b : j.at("stepped_bids")) {
            SteppedBid bid{b.at("dso").get<int>(), {}};
            for (const auto& s : b.at("steps"))
                bid.steps.push_back({s.at("quantity").get<double>(), s.at("price").get<double>(),
                                     s.at("rl_ids").get<std::vector<std::string>>()});
            r.stepped_bids.push_back(std::move(bid));
        }
        r.clearing = clearing_from_json(j.at("clearing"));
        for (const auto& l : j.at("local_dispatches")) r.local_dispatches.push_back(local_from_json(l));
        r.settlement = settlement_from_json(j.at("settlement"));
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("hour record: ") + e.what());
    }
}

json results_to_json(const std::vector<HourRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(record_to_json(r));
    return {{"records", arr}};
}

std::vector<HourRecord> results_from_json(const json& doc) {
    std::vector<HourRecord> out;
    for (const auto& r : doc.at("records")) out.push_back(record_from_json(r));
    return out;
}

std::string format_fixed(double value) {
    if (std::abs(value) < 5e-7) value = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

std::string bids_csv(const std::vector<HourRecord>& records) {
    std::ostringstream out;
    out << "hour,dso,step,quantity_mw,price,rl_ids\n";
    for (const auto& r : records) {
        for (const auto& b : r.stepped_bids) {
            for (std::size_t s = 0; s < b.steps.size(); ++s) {
                std::string ids;
                for (const auto& id : b.steps[s].rl_ids) ids += (ids.empty() ? "" : ";") + id;
                out << r.hour << ',' << b.dso << ',' << s << ',' << format_fixed(b.steps[s].quantity) << ','
                    << format_fixed(b.steps[s].price) << ',' << ids << '\n';
            }
        }
    }
    return out.str();
}

std::string dispatch_csv(const std::vector<HourRecord>& records, const ValidatedSystem& system) {
    std::ostringstream out;
    out << "hour,participant,kind,quantity_mw,payment\n";
    for (const auto& r : records) {
        std::map<std::string, const Payment*> paid;
        for (const auto& p : r.settlement.payments) paid[p.participant] = &p;
        auto row = [&](const std::string& name, const char* kind) {
            auto it = paid.find(name);
            const double q = it == paid.end() ? 0.0 : it->second->quantity;
            const double pay = it == paid.end() ? 0.0 : it->second->payment;
            out << r.hour << ',' << name << ',' << kind << ',' << format_fixed(q) << ',' << format_fixed(pay) << '\n';
        };
        for (const auto& g : system.network.generators) row(g.id, "generator");
        for (DsoId d : system.dso_ids()) row("DSO" + std::to_string(d), "dso");
        out << r.hour << ",slack,recourse," << format_fixed(r.clearing.slack_up - r.clearing.slack_down) << ','
            << format_fixed(r.settlement.slack_cost) << '\n';
    }
    return out.str();
}

std::string rl_dispatch_csv(const std::vector<HourRecord>& records, const ValidatedSystem& system) {
    std::ostringstream out;
    out << "hour,dso,rl_id,node,reduction_mw\n";
    for (const auto& r : records) {
        std::map<std::string, double> reduced;
        for (const auto& l : r.local_dispatches)
            for (const auto& d : l.dispatch) reduced[d.rl_id] += d.reduction;
        for (const auto& b : system.bids) {
            auto it = reduced.find(b.id);
            out << r.hour << ',' << b.dso << ',' << b.id << ',' << b.feeder_node << ','
                << format_fixed(it == reduced.end() ? 0.0 : it->second) << '\n';
        }
    }
    return out.str();
}

RunSummary summarize(const std::vector<HourRecord>& records, const ValidatedSystem& system) {
    RunSummary s;
    s.hours = static_cast<int>(records.size());
    for (DsoId d : system.dso_ids()) s.dsos.push_back({d});
    for (const auto& r : records) {
        if (!r.idle()) ++s.active_hours;
        s.total_tso_cost += r.settlement.tso_cost;
        s.total_slack_cost += r.settlement.slack_cost;
        s.total_conventional_cost += r.settlement.conventional_cost;
        for (double g : r.clearing.generator_regulation) s.generator_down_mw += std::max(0.0, -g);
        for (const auto& acc : r.clearing.dsos) {
            s.responsive_up_mw += acc.total;
            for (auto& ds : s.dsos) {
                if (ds.dso != acc.dso) continue;
                ds.cleared_mw += acc.total;
                if (acc.total > 1e-6) ++ds.hours_selected;
            }
        }
        for (const auto& p : r.settlement.dso_profit) {
            for (auto& ds : s.dsos) {
                if (ds.dso != p.dso) continue;
                ds.revenue += p.revenue;
                ds.profit += p.profit;
            }
        }
    }
    s.cheaper_option = s.total_tso_cost <= s.total_conventional_cost ? CheaperOption::ResponsiveLoads
                                                                     : CheaperOption::Conventional;
    return s;
}

json summary_to_json(const RunSummary& s) {
    json dsos = json::array();
    for (const auto& d : s.dsos)
        dsos.push_back({{"dso", d.dso},
                        {"cleared_mw", d.cleared_mw},
                        {"revenue", d.revenue},
                        {"profit", d.profit},
                        {"hours_selected", d.hours_selected}});
    return {{"hours", s.hours},
            {"active_hours", s.active_hours},
            {"total_tso_cost", s.total_tso_cost},
            {"total_slack_cost", s.total_slack_cost},
            {"total_conventional_cost", s.total_conventional_cost},
            {"generator_down_mw", s.generator_down_mw},
            {"responsive_up_mw", s.responsive_up_mw},
            {"dsos", dsos},
            {"cheaper_option", to_string(s.cheaper_option)}};
}

RunArtifacts write_artifacts(const std::vector<HourRecord>& records, const ValidatedSystem& system,
                             const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    RunArtifacts a;
    a.results = out_dir / "results.json";
    a.bids_csv = out_dir / "bids_fig5.csv";
    a.dispatch_csv = out_dir / "dispatch_fig6.csv";
    a.rl_dispatch_csv = out_dir / "rl_dispatch_fig7.csv";
    a.summary_json = out_dir / "summary.json";
    a.summary = summarize(records, system);

    write_text_file(a.results, results_to_json(records).dump(2) + "\n");
    write_text_file(a.bids_csv, bids_csv(records));
    write_text_file(a.dispatch_csv, dispatch_csv(records, system));
    write_text_file(a.rl_dispatch_csv, rl_dispatch_csv(records, system));
    write_text_file(a.summary_json, summary_to_json(a.summary).dump(2) + "\n");
    return a;
}

namespace {

struct CommonFlags {
    std::string network;
    std::vector<std::string> feeders;
    std::string bids;
    std::string scenario;
    std::string config;
    std::string out;
    std::string settlement;
    std::string aggregation = "pass-through";
    double loss_price = -1.0;
    bool parallel = false;
};

void add_common(CLI::App& app, CommonFlags& f, bool out_required) {
    app.add_option("--network", f.network, "network.json")->required();
    app.add_option("--feeders", f.feeders, "feeder-<dso>.json (repeatable)")->required();
    app.add_option("--bids", f.bids, "bids.json")->required();
    app.add_option("--scenario", f.scenario, "scenario.json")->required();
    app.add_option("--config", f.config, "config.json")->required();
    auto* out = app.add_option("--out", f.out, "output directory");
    if (out_required) out->required();
    app.add_option("--settlement", f.settlement, "pay-as-bid | uniform")
        ->check(CLI::IsMember({"pay-as-bid", "uniform"}));
    app.add_option("--loss-price", f.loss_price, "currency/MWh, overrides config")->check(CLI::NonNegativeNumber);
    app.add_option("--aggregation", f.aggregation, "pass-through | loss-adjusted")
        ->check(CLI::IsMember({"pass-through", "loss-adjusted"}));
    app.add_flag("--parallel", f.parallel, "clear hours on worker threads");
}

struct Loaded {
    ValidatedSystem system;
    WindScenario scenario;
    SimulationOptions options;
};

Loaded load_inputs(const CommonFlags& f) {
    DatasetFiles files{f.network, {f.feeders.begin(), f.feeders.end()}, f.bids, f.config};
    Loaded in;
    in.system = load_dataset(files);
    if (!f.settlement.empty()) in.system.config.settlement_mode = settlement_mode_from_string(f.settlement);
    if (f.loss_price >= 0.0) in.system.config.loss_price = f.loss_price;
    in.scenario = load_scenario(f.scenario, in.system.network);
    in.options.aggregation = aggregation_mode_from_string(f.aggregation);
    in.options.parallel = f.parallel;
    return in;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation failed:\n";
        for (const auto& v : e.violations()) err << "  [" << v.code << "] " << v.message << '\n';
        return kExitInvalid;
    } catch (const SchemaError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

int parse_or_report(CLI::App& app, std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return kExitInvalid;
    }
    return -1;
}

int cmd_simulate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Run the 24-hour balancing-market simulation", "balmarket simulate"};
    CommonFlags f;
    add_common(app, f, true);
    if (int code = parse_or_report(app, args, out, err); code >= 0) return code;

    return guarded(err, [&] {
        const Loaded in = load_inputs(f);
        const auto records = run_simulation(in.system, in.scenario, in.options);
        const RunArtifacts a = write_artifacts(records, in.system, f.out);
        out << "wrote " << records.size() << " hourly records to " << a.results.string() << '\n'
            << summary_to_json(a.summary).dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_clear_hour(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Clear a single hour and print its record as JSON", "balmarket clear-hour"};
    CommonFlags f;
    int hour = -1;
    add_common(app, f, false);
    app.add_option("--hour", hour, "hour index in [0, 24)")->required();
    if (int code = parse_or_report(app, args, out, err); code >= 0) return code;
    if (hour < 0 || hour >= kHoursPerDay) {
        err << "--hour must lie in [0, " << kHoursPerDay << "), got " << hour << '\n';
        return kExitInvalid;
    }

    return guarded(err, [&] {
        const Loaded in = load_inputs(f);
        const HourRecord rec = run_hour(in.system, in.scenario, hour, in.options);
        const std::string text = record_to_json(rec).dump(2) + "\n";
        if (!f.out.empty()) {
            std::filesystem::create_directories(f.out);
            write_text_file(std::filesystem::path(f.out) / ("hour_" + std::to_string(hour) + ".json"), text);
        }
        out << text;
        return kExitOk;
    });
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const std::string usage =
        "usage: balmarket <simulate|clear-hour> --network FILE --feeders FILE... --bids FILE --scenario FILE "
        "--config FILE [--out DIR] [--hour H] [--settlement MODE] [--loss-price X] [--aggregation MODE]\n";
    if (args.empty()) {
        err << usage;
        return kExitInvalid;
    }
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (args[0] == "simulate") return cmd_simulate(rest, out, err);
    if (args[0] == "clear-hour") return cmd_clear_hour(rest, out, err);
    if (args[0] == "--help" || args[0] == "-h") {
        out << usage;
        return kExitOk;
    }
    err << "unknown command \"" << args[0] << "\"\n" << usage;
    return kExitInvalid;
}

}  // namespace balmarket
