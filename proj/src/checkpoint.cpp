#include "grpoqa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <sstream>

#include "grpoqa/util.hpp"

namespace grpoqa {

namespace {

constexpr const char* kMagic = "grpoqa-ckpt v1";

std::uint64_t parse_hex64(const std::string& tok) {
    if (tok.size() != 16) throw ParseError("checkpoint: bad hex token \"" + tok + "\"");
    std::uint64_t v = 0;
    for (char c : tok) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= std::uint64_t(c - '0');
        else if (c >= 'a' && c <= 'f') v |= std::uint64_t(c - 'a' + 10);
        else throw ParseError("checkpoint: bad hex token \"" + tok + "\"");
    }
    return v;
}

long read_header_field(std::istringstream& in, const std::string& expected_key) {
    std::string key;
    long value = 0;
    if (!(in >> key >> value) || key != expected_key) {
        throw ParseError("checkpoint: expected header field \"" + expected_key + "\"");
    }
    return value;
}

} // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    const PolicyShape& s = ckpt.params.shape;
    if (s.vocab_size != ckpt.vocab.size) throw InputError("checkpoint: vocab/shape size mismatch");
    if (static_cast<int>(ckpt.words.size()) > ckpt.vocab.word_slots()) {
        throw InputError("checkpoint: more words than vocab slots");
    }

    std::ostringstream os;
    os << kMagic << '\n';
    os << "vocab_size " << s.vocab_size << '\n';
    os << "context_channels " << ckpt.vocab.context_count << '\n';
    os << "embed_dim " << s.embed_dim << '\n';
    os << "window " << s.window << '\n';
    os << "hidden_dim " << s.hidden_dim << '\n';
    os << "version " << ckpt.params.version << '\n';
    os << "words " << ckpt.words.size() << '\n';
    for (std::size_t i = 0; i < ckpt.words.size(); ++i) {
        if (i > 0) os << ' ';
        os << ckpt.words[i];
    }
    os << '\n';
    os << "params " << ckpt.params.flat.size() << '\n';
    for (std::size_t i = 0; i < ckpt.params.flat.size(); ++i) {
        os << to_hex(std::bit_cast<std::uint64_t>(ckpt.params.flat[i]));
        os << ((i % 8 == 7 || i + 1 == ckpt.params.flat.size()) ? '\n' : ' ');
    }
    std::string body = os.str();
    body += "checksum " + to_hex(fnv1a64(body)) + "\n";
    return body;
}

Checkpoint checkpoint_from_string(const std::string& text) {
    const std::size_t mark = text.rfind("checksum ");
    if (mark == std::string::npos || mark == 0 || text[mark - 1] != '\n') {
        throw ParseError("checkpoint: missing checksum line");
    }
    const std::string body = text.substr(0, mark);
    {
        std::istringstream tail(text.substr(mark));
        std::string key, hex;
        if (!(tail >> key >> hex) || key != "checksum") throw ParseError("checkpoint: bad checksum line");
        if (parse_hex64(hex) != fnv1a64(body)) {
            throw ParseError("checkpoint: checksum mismatch (file corrupted)");
        }
    }

    std::istringstream in(body);
    std::string magic_line;
    std::getline(in, magic_line);
    if (magic_line != kMagic) throw ParseError("checkpoint: bad magic line");

    const long vocab_size = read_header_field(in, "vocab_size");
    const long context_channels = read_header_field(in, "context_channels");
    const long embed_dim = read_header_field(in, "embed_dim");
    const long window = read_header_field(in, "window");
    const long hidden_dim = read_header_field(in, "hidden_dim");
    const long version = read_header_field(in, "version");
    const long n_words = read_header_field(in, "words");

    Checkpoint ckpt;
    ckpt.vocab = Vocab(static_cast<int>(vocab_size), static_cast<int>(context_channels));
    PolicyShape shape;
    shape.vocab_size = static_cast<int>(vocab_size);
    shape.embed_dim = static_cast<int>(embed_dim);
    shape.window = static_cast<int>(window);
    shape.hidden_dim = static_cast<int>(hidden_dim);
    shape.validate();

    ckpt.words.reserve(static_cast<std::size_t>(n_words));
    for (long i = 0; i < n_words; ++i) {
        std::string w;
        if (!(in >> w)) throw ParseError("checkpoint: truncated word table");
        ckpt.words.push_back(w);
    }
    if (static_cast<int>(ckpt.words.size()) > ckpt.vocab.word_slots()) {
        throw ParseError("checkpoint: word table larger than vocab");
    }

    const long n_params = read_header_field(in, "params");
    if (n_params != static_cast<long>(shape.param_count())) {
        throw ParseError("checkpoint: parameter count does not match shape header");
    }
    ckpt.params = PolicyParams::zeros(shape);
    ckpt.params.version = static_cast<std::uint64_t>(version);
    for (long i = 0; i < n_params; ++i) {
        std::string tok;
        if (!(in >> tok)) throw ParseError("checkpoint: truncated parameter block");
        ckpt.params.flat[static_cast<std::size_t>(i)] = std::bit_cast<double>(parse_hex64(tok));
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    try {
        return checkpoint_from_string(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

bool looks_like_checkpoint(const std::string& content) {
    return content.rfind(kMagic, 0) == 0;
}

} // namespace grpoqa
