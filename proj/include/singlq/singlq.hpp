#pragma once

#include "singlq/matlib.hpp"
#include "singlq/model.hpp"
#include "singlq/riccati.hpp"
#include "singlq/geometry.hpp"
#include "singlq/analyzer.hpp"
#include "singlq/io.hpp"
#include "singlq/generate.hpp"
#include "singlq/log.hpp"
