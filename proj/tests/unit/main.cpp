#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "srcplan/log.hpp"

int main(int argc, char** argv) {
    srcplan::set_quiet(true);
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
