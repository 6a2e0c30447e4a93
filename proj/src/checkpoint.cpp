#include "adabayes/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "adabayes/text_format.hpp"

namespace adabayes::cli {

namespace {

constexpr std::string_view kMagic = "adabayes-checkpoint";

void write_vector(std::ostream& out, std::string_view name, const std::vector<double>& values) {
    out << name << ' ' << values.size();
    if (!values.empty()) {
        out << ' ' << join_reals(values);
    }
    out << '\n';
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Next line split on whitespace; the first token must equal `tag`.
    std::vector<std::string> line(std::string_view tag) {
        std::string text;
        if (!std::getline(in_, text)) {
            throw CheckpointError("truncated checkpoint: expected '" + std::string(tag) + "' record");
        }
        std::istringstream fields(text);
        std::vector<std::string> tokens;
        for (std::string tok; fields >> tok;) {
            tokens.push_back(std::move(tok));
        }
        if (tokens.empty() || tokens.front() != tag) {
            throw CheckpointError("malformed checkpoint: expected '" + std::string(tag) + "' record");
        }
        return tokens;
    }

    std::string rest_of(std::string_view tag) {
        std::string text;
        if (!std::getline(in_, text)) {
            throw CheckpointError("truncated checkpoint: expected '" + std::string(tag) + "' record");
        }
        if (text.rfind(std::string(tag) + ' ', 0) != 0) {
            throw CheckpointError("malformed checkpoint: expected '" + std::string(tag) + "' record");
        }
        return text.substr(tag.size() + 1);
    }

    std::uint64_t number(std::string_view tag) {
        const auto tokens = line(tag);
        if (tokens.size() != 2) {
            throw CheckpointError("malformed checkpoint: '" + std::string(tag) + "' takes one value");
        }
        return unsigned_value(tokens[1], tag);
    }

    std::vector<double> reals(std::string_view tag) {
        const auto tokens = line(tag);
        if (tokens.size() < 2) {
            throw CheckpointError("malformed checkpoint: '" + std::string(tag) + "' is missing its length");
        }
        const auto count = unsigned_value(tokens[1], tag);
        if (tokens.size() - 2 != count) {
            throw CheckpointError("truncated checkpoint: '" + std::string(tag) + "' declares " +
                                  std::to_string(count) + " values, found " + std::to_string(tokens.size() - 2));
        }
        std::vector<double> out;
        out.reserve(count);
        for (std::size_t i = 2; i < tokens.size(); ++i) {
            auto v = parse_real(tokens[i]);
            if (!v) {
                throw CheckpointError("malformed checkpoint: bad real '" + tokens[i] + "' in '" + std::string(tag) + "'");
            }
            out.push_back(*v);
        }
        return out;
    }

    std::string bytes(std::size_t count) {
        std::string out(count, '\0');
        if (count > 0 && !in_.read(out.data(), static_cast<std::streamsize>(count))) {
            throw CheckpointError("truncated checkpoint: embedded config is incomplete");
        }
        return out;
    }

    static std::uint64_t unsigned_value(const std::string& token, std::string_view tag) {
        auto v = parse_unsigned(token);
        if (!v) {
            throw CheckpointError("malformed checkpoint: bad integer '" + token + "' in '" + std::string(tag) + "'");
        }
        return *v;
    }

private:
    std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
    out << kMagic << ' ' << c.version << '\n';
    out << "label " << c.label << '\n';
    out << "kind " << to_string(c.kind) << '\n';
    out << "step " << c.state.step << '\n';
    out << "rng " << c.state.rng_state << '\n';
    out << "config " << c.config_text.size() << '\n' << c.config_text << '\n';
    write_vector(out, "params", c.state.params);
    out << "slots " << c.state.slots.size() << '\n';
    for (const auto& slot : c.state.slots) {
        out << "slot " << slot.moments.size() << ' ' << slot.moments.t << ' ' << (slot.filter ? 1 : 0) << '\n';
        write_vector(out, "m", slot.moments.m);
        write_vector(out, "v", slot.moments.v);
        if (slot.filter) {
            write_vector(out, "mu", slot.filter->mu);
            write_vector(out, "s_post", slot.filter->s_post);
        }
    }
    out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
    Reader r(in);
    Checkpoint c;

    const auto header = r.line(kMagic);
    if (header.size() != 2) {
        throw CheckpointError("malformed checkpoint header");
    }
    const auto version = parse_unsigned(header[1]);
    if (!version) {
        throw CheckpointError("malformed checkpoint version '" + header[1] + "'");
    }
    if (*version != static_cast<std::uint64_t>(kCheckpointVersion)) {
        throw CheckpointError("checkpoint format version " + header[1] + " is not supported (this build reads version " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    c.version = kCheckpointVersion;

    const auto label = r.line("label");
    if (label.size() != 2) {
        throw CheckpointError("malformed checkpoint: 'label' takes one value");
    }
    c.label = label[1];

    const auto kind = r.line("kind");
    const auto parsed_kind = kind.size() == 2 ? parse_optimizer_kind(kind[1]) : std::nullopt;
    if (!parsed_kind) {
        throw CheckpointError("malformed checkpoint: unknown optimizer kind");
    }
    c.kind = *parsed_kind;

    c.state.step = r.number("step");
    c.state.rng_state = r.rest_of("rng");
    const auto config_size = r.number("config");
    c.config_text = r.bytes(config_size);
    if (in.get() != '\n') {
        throw CheckpointError("malformed checkpoint: embedded config is not terminated");
    }
    c.state.params = r.reals("params");

    const auto slot_count = r.number("slots");
    for (std::uint64_t s = 0; s < slot_count; ++s) {
        const auto head = r.line("slot");
        if (head.size() != 4) {
            throw CheckpointError("malformed checkpoint: 'slot' takes size, step and filter flag");
        }
        const auto size = Reader::unsigned_value(head[1], "slot");
        SlotState slot;
        slot.moments.t = Reader::unsigned_value(head[2], "slot");
        const auto has_filter = Reader::unsigned_value(head[3], "slot");
        slot.moments.m = r.reals("m");
        slot.moments.v = r.reals("v");
        if (has_filter == 1) {
            FilterState f;
            f.mu = r.reals("mu");
            f.s_post = r.reals("s_post");
            slot.filter = std::move(f);
        }
        const bool sizes_ok = slot.moments.m.size() == size && slot.moments.v.size() == size &&
                              (!slot.filter || (slot.filter->mu.size() == size && slot.filter->s_post.size() == size));
        if (!sizes_ok) {
            throw CheckpointError("malformed checkpoint: slot " + std::to_string(s) + " buffers disagree in size");
        }
        c.state.slots.push_back(std::move(slot));
    }
    r.line("end");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
    }
    write_checkpoint(out, checkpoint);
    out.flush();
    if (!out) {
        throw std::ios_base::failure("failed writing '" + path.string() + "'");
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::ios_base::failure("cannot open checkpoint '" + path.string() + "'");
    }
    return read_checkpoint(in);
}

}  // namespace adabayes::cli
