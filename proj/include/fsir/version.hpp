#pragma once

#define FSIR_VERSION "0.1.0"
