import { HintServiceClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8077";

const client = new HintServiceClient(baseUrl);
const app = new App(document.getElementById("app")!, client);
void app.start(client);
