from django.contrib import admin
from .models import SweepRun


@admin.register(SweepRun)
class SweepRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'config_hash', 'seed', 'parameter', 'gridpoints', 'failures', 'status', 'created_at')
    search_fields = ('config_hash', 'parameter')
    ordering = ('-created_at',)
    list_filter = ('status', 'code_version')
    readonly_fields = ('report',)
