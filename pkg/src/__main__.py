"""Entry point for the ktan CLI."""

from src.cli.commands import app

if __name__ == "__main__":
    app()
