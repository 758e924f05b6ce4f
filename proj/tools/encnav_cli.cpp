#include <cstdio>

int main() {
    std::puts("encnav: placeholder");
    return 0;
}
