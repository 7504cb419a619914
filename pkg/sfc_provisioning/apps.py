from django.apps import AppConfig


class SfcProvisioningConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "sfc_provisioning"
    verbose_name = "SFC Resource Provisioning on MEC"
