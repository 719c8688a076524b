import { ApiClient } from "./api.js";
import { App } from "./app.js";

const api = new ApiClient("");
void new App(document, api).init();
