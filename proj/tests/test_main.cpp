#include <catch2/catch_amalgamated.hpp>

#include "alloc_tuning.hpp"

int main(int argc, char** argv) {
    specbench::tune_allocator();
    return Catch::Session().run(argc, argv);
}
