#include <catch2/catch_amalgamated.hpp>

#include "tscast/tscast.hpp"
