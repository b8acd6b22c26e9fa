"""Main entry point for the lpnested toolkit."""
from .cli import main


if __name__ == "__main__":
    main()
