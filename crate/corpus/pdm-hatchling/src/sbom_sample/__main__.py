"""Example entry point."""
import numpy as np


def main() -> None:
    values = np.arange(10)
    print(values.mean())


if __name__ == "__main__":
    main()
