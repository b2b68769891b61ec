#include "hive/log.hpp"

#include <iostream>
#include <mutex>

namespace hive::log {

namespace {

std::mutex g_mutex;

Sink& sink() {
    static Sink s = [](Level level, std::string_view message) {
        if (level < Level::Warning) return;
        std::cerr << (level == Level::Error ? "[error] " : "[warn] ") << message << '\n';
    };
    return s;
}

}  // namespace

Sink set_sink(Sink s) {
    std::lock_guard lock(g_mutex);
    Sink old = std::move(sink());
    sink() = std::move(s);
    return old;
}

void write(Level level, std::string_view message) {
    std::lock_guard lock(g_mutex);
    if (sink()) sink()(level, message);
}

}  // namespace hive::log
