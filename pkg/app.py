import logging

from flask import Flask

import config
from routes.mapping import mapping_bp


def create_app() -> Flask:
    app = Flask(__name__)
    app.config['MAX_CONTENT_LENGTH'] = config.MAX_CONTENT_LENGTH
    app.json.sort_keys = False
    app.register_blueprint(mapping_bp)
    return app


# Configure logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)

app = create_app()
