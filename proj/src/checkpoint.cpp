#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "specbench/error.hpp"
#include "specbench/models.hpp"

// Container layout:
//   "SPECBENCH-CKPT 1\n"
//   key=value lines sorted by key (config.* and meta.*), then an empty line
//   records until EOF: u32 name length, name, u32 rank, u64 dims[rank], f64 values
// All integers and doubles are little-endian.

namespace specbench {

namespace {

constexpr const char* kMagic = "SPECBENCH-CKPT 1";
constexpr const char* kHistory = "__history";

void put_u64(std::string& out, std::uint64_t v, int bytes = 8) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& s, std::size_t pos) : s_(s), pos_(pos) {}
    bool done() const { return pos_ >= s_.size(); }
    std::uint64_t u(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string r = s_.substr(pos_, n);
        pos_ += n;
        return r;
    }

private:
    void need(std::size_t n) const {
        require(pos_ + n <= s_.size(), ErrorCode::SchemaError, "checkpoint truncated");
    }
    const std::string& s_;
    std::size_t pos_;
};

void put_record(std::string& out, const std::string& name, const nn::Tensor& t) {
    put_u64(out, name.size(), 4);
    out += name;
    put_u64(out, t.rank(), 4);
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

}  // namespace

std::string serialize_checkpoint(const TrainedModel& model) {
    std::map<std::string, std::string> header;
    for (const auto& [k, v] : model.config.to_map()) header["config." + k] = v;
    header["meta.best_step"] = std::to_string(model.best_step);
    header["meta.parameters"] = std::to_string(model.parameters.size());
    header["meta.steps_run"] = std::to_string(model.steps_run);

    std::string out = std::string(kMagic) + "\n";
    for (const auto& [k, v] : header) out += k + "=" + v + "\n";
    out += "\n";
    for (const auto& p : model.parameters) put_record(out, p.name, p.value);
    nn::Tensor hist(nn::Shape{model.history.size(), 3});
    for (std::size_t i = 0; i < model.history.size(); ++i) {
        hist[3 * i] = static_cast<double>(model.history[i].step);
        hist[3 * i + 1] = model.history[i].train_loss;
        hist[3 * i + 2] = model.history[i].val_loss;
    }
    put_record(out, kHistory, hist);
    return out;
}

TrainedModel deserialize_checkpoint(const std::string& bytes) {
    const std::string magic = std::string(kMagic) + "\n";
    require(bytes.compare(0, magic.size(), magic) == 0, ErrorCode::SchemaError, "not a checkpoint (bad magic)");
    std::size_t pos = magic.size();
    std::map<std::string, std::string> config, meta;
    for (;;) {
        const auto nl = bytes.find('\n', pos);
        require(nl != std::string::npos, ErrorCode::SchemaError, "checkpoint header not terminated");
        const std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) break;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::SchemaError, "malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key.rfind("config.", 0) == 0) config[key.substr(7)] = value;
        else meta[key] = value;
    }
    TrainedModel model;
    model.config = ModelConfig::from_map(config);
    try {
        model.steps_run = std::stoull(meta.at("meta.steps_run"));
        model.best_step = std::stoull(meta.at("meta.best_step"));
    } catch (const std::exception&) {
        fail(ErrorCode::SchemaError, "checkpoint header lacks meta.steps_run / meta.best_step");
    }
    Reader r(bytes, pos);
    while (!r.done()) {
        const std::string name = r.str(r.u(4));
        const auto rank = r.u(4);
        nn::Shape shape(rank);
        for (auto& d : shape) d = r.u(8);
        std::vector<double> data(nn::numel(shape));
        for (auto& v : data) v = std::bit_cast<double>(r.u(8));
        nn::Tensor t(std::move(shape), std::move(data));
        if (name == kHistory) {
            require(t.rank() == 2 && t.dim(1) == 3, ErrorCode::SchemaError, "bad history record");
            for (std::size_t i = 0; i < t.dim(0); ++i) {
                model.history.push_back({static_cast<std::size_t>(t[3 * i]), t[3 * i + 1], t[3 * i + 2]});
            }
        } else {
            model.parameters.push_back({name, std::move(t)});
        }
    }
    return model;
}

void save_checkpoint(const TrainedModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::IoError, "cannot write '" + path + "'");
    const std::string bytes = serialize_checkpoint(model);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), ErrorCode::IoError, "short write to '" + path + "'");
}

TrainedModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::IoError, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace specbench
