#include <iostream>
int main() {
    std::cout << "acceptance suite placeholder\n";
    return 1;
}
